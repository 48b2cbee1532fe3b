"""
Experiment configuration: flat key=value files, one key per line,
'#' starts a comment, lists are comma-separated.
"""

import logging
import os

from nashseek import config as defaults
from nashseek.game_core import (
    StrategySet,
    generate_cournot_instance,
    cournot_game,
    duopoly_params,
    separable_game,
)
from nashseek.mirror_descent import UpdateRule, FULL_SET, HYPERPLANE_ONLY
from nashseek.sdl import Schedules, SDL, SINGLE_SHOT

logger = logging.getLogger(__name__)

GAMES = ("cournot", "duopoly", "separable")
ALGORITHMS = (SDL, SINGLE_SHOT)
PROJECTIONS = (FULL_SET, HYPERPLANE_ONLY)


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def _parse_bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _parse_float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


# key -> (parser, default)
SCHEMA = {
    "game": (str, "cournot"),
    "N": (int, 20),
    "m": (int, 5),
    "instance_seed": (int, 2021),
    "noise": (_parse_bool, True),
    "duopoly_a": (float, 5.0),
    "duopoly_b": (float, 1.0),
    "duopoly_c": (float, 3.0),
    "box_hi": (float, 10.0),
    "gamma": (float, defaults.DEFAULT_GAMMA),
    "ell0": (int, defaults.DEFAULT_ELL0),
    "p": (float, defaults.DEFAULT_P),
    "h0": (float, defaults.DEFAULT_H0),
    "h_exponent": (float, defaults.SINGLE_SHOT_H_EXPONENT),
    "algorithm": (str, SDL),
    "projection": (str, FULL_SET),
    "iters": (int, defaults.DEFAULT_ITERS),
    "seeds": (int, defaults.DEFAULT_SEEDS),
    "seed_list": (_parse_int_list, []),
    "master_seed": (int, 0),
    "record_every": (int, defaults.DEFAULT_RECORD_EVERY),
    "out": (str, defaults.OUTPUT_DIR),
    "tol": (float, defaults.REFERENCE_TOL),
    "max_iter": (int, defaults.REFERENCE_MAX_ITER),
    "workers": (int, defaults.NUM_WORKERS),
    "run_id": (str, ""),
    "p_list": (_parse_float_list, []),
    "reference": (str, ""),
}


def _format_value(value):
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, list):
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ExperimentConfig:
    """
    Fully resolved experiment settings.

    Every key of SCHEMA is an attribute. The resolved config is written next
    to the run's outputs so each artifact directory can be replayed alone.
    """

    def __init__(self, **values):
        for key, (_, default) in SCHEMA.items():
            setattr(self, key, list(default) if isinstance(default, list) else default)
        self.update(values)

    def update(self, values):
        for key, raw in values.items():
            if raw is None:
                continue
            if key not in SCHEMA:
                raise ConfigError(f"Unknown config key: {key}")
            parser = SCHEMA[key][0]
            try:
                value = parser(raw) if isinstance(raw, str) else raw
            except ValueError as e:
                raise ConfigError(f"Bad value for {key}: {raw!r} ({e})")
            setattr(self, key, value)
        self.validate()
        return self

    def validate(self):
        if self.game not in GAMES:
            raise ConfigError(f"game must be one of {GAMES}, got {self.game!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.projection not in PROJECTIONS:
            raise ConfigError(f"projection must be one of {PROJECTIONS}, got {self.projection!r}")
        if self.projection == HYPERPLANE_ONLY and self.game != "cournot":
            raise ConfigError("hyperplane projection is only defined for the cournot game")
        if self.iters < 1:
            raise ConfigError(f"iters must be >= 1, got {self.iters}")
        if self.seeds < 1 and not self.seed_list:
            raise ConfigError("need at least one seed")
        if self.gamma <= 0 or self.h0 <= 0 or self.ell0 < 1 or self.p < 0:
            raise ConfigError("schedules need gamma > 0, h0 > 0, ell0 >= 1, p >= 0")

    @classmethod
    def from_text(cls, text, source="<text>"):
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in values:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key}")
            values[key] = value
        return cls(**values)

    @classmethod
    def from_file(cls, path):
        if not os.path.exists(path):
            raise ConfigError(f"Config file not found: {path}")
        with open(path, "r") as f:
            text = f.read()
        logger.info(f"Loaded config from {path}")
        return cls.from_text(text, source=path)

    def to_text(self):
        lines = ["# nashseek experiment config (resolved)"]
        for key in SCHEMA:
            lines.append(f"{key}={_format_value(getattr(self, key))}")
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {key: getattr(self, key) for key in SCHEMA}

    def copy(self, **overrides):
        values = self.to_dict()
        values.update(overrides)
        return ExperimentConfig(**values)

    # ------------------------------------------------------------------
    # Derived objects
    # ------------------------------------------------------------------

    def seed_values(self):
        if self.seed_list:
            return list(self.seed_list)
        return [self.master_seed + k for k in range(self.seeds)]

    def schedules(self):
        return Schedules(self.gamma, self.ell0, self.p, self.h0)

    def update_rule(self):
        return UpdateRule(self.projection)

    def resolved_run_id(self):
        if self.run_id:
            return self.run_id
        return f"{self.algorithm}_p{self.p:g}_{self.projection}"

    def build_game(self):
        """Instantiates the configured game; Cournot sets follow the projection mode."""
        if self.game == "cournot":
            params = generate_cournot_instance(self.N, self.m, self.instance_seed)
            if not self.noise:
                params = params.without_noise()
            kind = StrategySet.HYPERPLANE if self.projection == HYPERPLANE_ONLY else StrategySet.SIMPLEX
            return cournot_game(params, kind)
        if self.game == "duopoly":
            params = duopoly_params(self.duopoly_a, self.duopoly_b, self.duopoly_c,
                                    noise=self.noise, capacity=self.box_hi)
            return cournot_game(params, StrategySet.BOX)
        return separable_game(self.N, self.m, self.instance_seed,
                              noise_halfwidth=0.5 if self.noise else 0.0, bound=self.box_hi)

    def build_reference_game(self):
        """
        The game whose equilibrium errors are measured against. Cournot
        strategies live on the simplices whatever the projection mode.
        """
        game = self.build_game()
        if self.game == "cournot" and self.projection == HYPERPLANE_ONLY:
            return game.with_sets([StrategySet.simplex(m_i) for m_i in game.dims])
        return game
