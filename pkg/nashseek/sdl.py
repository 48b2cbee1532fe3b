import logging
import math

import numpy as np

from nashseek.config import H_UNDERFLOW, SINGLE_SHOT_H_EXPONENT
from nashseek.estimators import (
    sample_perturbations,
    sample_unit_sphere,
    spsa_from_observations,
    single_shot_from_observation,
)
from nashseek.game_core import StrategySet, monotonicity_constant
from nashseek.mirror_descent import (
    EuclideanRegularizer,
    UpdateRule,
    FULL_SET,
    HYPERPLANE_ONLY,
    mirror_step,
)
from nashseek.streams import derive_stream

logger = logging.getLogger(__name__)

SDL = "sdl"
SINGLE_SHOT = "single_shot"


class NonFiniteObservation(FloatingPointError):
    """A cost draw came back NaN or infinite."""


class Schedules:
    """
    Step, batch and smoothing schedules:
        gamma_n = gamma / n
        ell_n   = ceil(ell0 * n^p)
        h_n     = h0 * n^(-(p + 1) / 4)
    """

    def __init__(self, gamma, ell0=1, p=0.0, h0=0.1):
        if not gamma > 0:
            raise ValueError(f"gamma must be positive, got {gamma}")
        if ell0 < 1:
            raise ValueError(f"ell0 must be >= 1, got {ell0}")
        if p < 0:
            raise ValueError(f"p must be >= 0, got {p}")
        if not h0 > 0:
            raise ValueError(f"h0 must be positive, got {h0}")
        self.gamma = float(gamma)
        self.ell0 = int(ell0)
        self.p = float(p)
        self.h0 = float(h0)

    def at(self, n):
        return schedules_at(self, n)

    def __str__(self):
        return f"Schedules(gamma={self.gamma}, ell0={self.ell0}, p={self.p}, h0={self.h0})"


def schedules_at(s, n):
    """(gamma_n, ell_n, h_n) at iteration n >= 1; only ell_n is rounded (up)."""
    if n < 1:
        raise ValueError(f"Iteration index must be >= 1, got {n}")
    gamma_n = s.gamma / n
    ell_n = max(1, int(math.ceil(s.ell0 * n ** s.p - 1e-9)))
    h_n = s.h0 * n ** (-(s.p + 1.0) / 4.0)
    return gamma_n, ell_n, h_n


def predicted_rate_exponent(p):
    """q in E||x^n - x*||^2 = O(n^-q): (p+1)/2 up to p = 1, then 1."""
    return min((p + 1.0) / 2.0, 1.0)


class RunTrace:
    """Everything recorded along one learning run."""

    def __init__(self, algorithm, seed, num_players):
        self.algorithm = algorithm
        self.seed = seed
        self.num_players = num_players
        self.iterates = []          # (n, joint point), thinned
        self.sq_error = []          # ||x^n - x*||^2, every iteration
        self.cum_evals = []         # cost evaluations per player so far
        self.schedule_log = []      # (gamma_n, ell_n, h_n)
        self.negativity_events = 0
        self.final_point = None

    @property
    def iterations(self):
        return len(self.schedule_log)

    def finalize(self):
        self.sq_error = np.asarray(self.sq_error, dtype=float)
        self.cum_evals = np.asarray(self.cum_evals, dtype=np.int64)
        return self

    def __str__(self):
        tail = f", final sq_error={self.sq_error[-1]:.3e}" if len(self.sq_error) else ""
        return f"RunTrace({self.algorithm}, seed={self.seed}, n={self.iterations}{tail})"


def _reference_point(ref):
    if ref is None:
        return None
    return np.asarray(getattr(ref, "x_star", ref), dtype=float)


def _check_start(game, x0, rule):
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (game.d,):
        raise ValueError(f"Start point has shape {x0.shape}, expected ({game.d},)")
    if rule.projection_mode == HYPERPLANE_ONLY:
        plane_ok = all(StrategySet.hyperplane(m).contains(x0[sl]) for m, sl in zip(game.dims, game.slices))
        if not plane_ok:
            raise ValueError("Start point is not on the sum-one hyperplane of every player")
    elif not game.is_feasible(x0):
        raise ValueError("Start point is not feasible for every player")
    return x0.copy()


def _check_step_condition(game, gamma, beta):
    if beta is None and game.jacobian is not None:
        beta = monotonicity_constant(game.jacobian)
    if beta is None:
        return None
    if gamma * beta <= 1.0:
        logger.warning(f"gamma * beta = {gamma * beta:.3f} <= 1: the rate guarantee needs gamma > 1/beta = {1.0 / beta:.3f}")
    return beta


def _check_finite(costs, n, point):
    costs = np.asarray(costs)
    if not np.all(np.isfinite(costs)):
        bad = sorted({int(i) for i in np.nonzero(~np.isfinite(costs))[-1]})
        raise NonFiniteObservation(f"Non-finite cost for players {bad} at iteration {n}, point {point}")


def _player_step(reg, strategy_set, rule, x_i, plus_i, minus_i, deltas_i, h, gamma):
    """
    One player's SDL update from player-local data only: its strategy, its
    own cost observations and its own slice of the perturbations.
    """
    grad_i = spsa_from_observations(plus_i, minus_i, deltas_i, h)
    return mirror_step(reg, strategy_set, rule, x_i, grad_i, gamma)


def _record(trace, n, x, x_star, sched, cum, record_every, rule):
    trace.schedule_log.append(sched)
    trace.cum_evals.append(cum)
    if x_star is not None:
        diff = x - x_star
        trace.sq_error.append(float(np.dot(diff, diff)))
    if n % record_every == 0:
        trace.iterates.append((n, x.copy()))
    if rule.projection_mode == HYPERPLANE_ONLY and np.any(x < 0.0):
        trace.negativity_events += 1


def run_sdl(game, schedules, x0, iterations, ref=None, seed=0, record_every=1,
            rule=None, reg=None, beta=None):
    """
    Simultaneous-perturbation distributed learning.

    Each iteration draws ell_n joint Rademacher perturbations, plays the game
    at x +- h_n Delta_j, and lets every player form its own gradient estimate
    from its own costs and its own coordinates of Delta_j before taking a
    mirror step with gamma_n.

    Args:
        game (GameInstance): The game.
        schedules (Schedules): gamma, ell0, p, h0.
        x0 (array): Feasible joint start.
        iterations (int): Fixed budget T.
        ref (NEReference or array, optional): x* for squared errors.
        seed (int): Master seed; iteration n uses stream (seed, n).
        record_every (int): Thinning of stored iterates.
        rule (UpdateRule): Defaults to FullSet projection.
        reg (Regularizer): Defaults to Euclidean.
        beta (float, optional): Monotonicity constant for the gamma * beta check.

    Returns:
        RunTrace
    """
    if iterations < 1:
        raise ValueError(f"Iteration budget must be >= 1, got {iterations}")
    rule = rule or UpdateRule(FULL_SET)
    reg = reg or EuclideanRegularizer()
    record_every = max(1, int(record_every))

    x = _check_start(game, x0, rule)
    x_star = _reference_point(ref)
    _check_step_condition(game, schedules.gamma, beta)

    N = game.num_players
    trace = RunTrace(SDL, seed, N)
    cum = 0

    logger.info(f"SDL on {game.name}: {schedules}, T={iterations}, seed={seed}, {rule}")
    for n in range(1, iterations + 1):
        gamma_n, ell_n, h_n = schedules_at(schedules, n)
        if h_n < H_UNDERFLOW:
            logger.warning(f"h_n={h_n:.3e} underflowed at n={n}; stopping early")
            break

        stream = derive_stream(seed, n)
        deltas = sample_perturbations(ell_n, game.d, stream)
        # rows interleave up_j, down_j so the stream is consumed pair by pair
        played = np.empty((2 * ell_n, game.d))
        played[0::2] = x + h_n * deltas
        played[1::2] = x - h_n * deltas
        costs = game.sample_costs_batch(played, stream)
        plus = costs[0::2]
        minus = costs[1::2]
        _check_finite(plus, n, "x + h_n Delta")
        _check_finite(minus, n, "x - h_n Delta")

        x_next = np.empty_like(x)
        for i, sl in enumerate(game.slices):
            x_next[sl] = _player_step(reg, game.sets[i], rule, x[sl],
                                      plus[:, i], minus[:, i], deltas[:, sl], h_n, gamma_n)
        x = x_next
        cum += 2 * ell_n
        _record(trace, n, x, x_star, (gamma_n, ell_n, h_n), cum, record_every, rule)

    trace.final_point = x
    trace.finalize()
    if rule.projection_mode == HYPERPLANE_ONLY and trace.negativity_events:
        logger.warning(f"{trace.negativity_events} iterations left the nonnegative orthant (hyperplane mode)")
    logger.info(f"SDL finished: {trace}")
    return trace


def run_single_shot_baseline(game, schedules, x0, iterations, ref=None, seed=0, record_every=1,
                             h_exponent=SINGLE_SHOT_H_EXPONENT, rule=None, reg=None, beta=None):
    """
    Learning with one-evaluation sphere estimates.

    Each player plays x_i + h_n z_i with z_i uniform on its own unit sphere,
    observes one cost, forms (m_i / h_n) f z_i and mirror-steps from x_i.
    Uses gamma_n = gamma / n and h_n = h0 n^(-h_exponent); ell0 and p are ignored.
    """
    if iterations < 1:
        raise ValueError(f"Iteration budget must be >= 1, got {iterations}")
    rule = rule or UpdateRule(FULL_SET)
    reg = reg or EuclideanRegularizer()
    record_every = max(1, int(record_every))

    x = _check_start(game, x0, rule)
    x_star = _reference_point(ref)
    _check_step_condition(game, schedules.gamma, beta)

    trace = RunTrace(SINGLE_SHOT, seed, game.num_players)

    logger.info(f"Single-shot on {game.name}: gamma={schedules.gamma}, h0={schedules.h0}, "
                f"h exponent={h_exponent:.3f}, T={iterations}, seed={seed}")
    for n in range(1, iterations + 1):
        gamma_n = schedules.gamma / n
        h_n = schedules.h0 * n ** (-h_exponent)
        if h_n < H_UNDERFLOW:
            logger.warning(f"h_n={h_n:.3e} underflowed at n={n}; stopping early")
            break

        stream = derive_stream(seed, n)
        directions = [sample_unit_sphere(m_i, stream) for m_i in game.dims]
        played = x + h_n * np.concatenate(directions)
        costs = game.sample_costs(played, stream)
        _check_finite(costs, n, played)

        x_next = np.empty_like(x)
        for i, sl in enumerate(game.slices):
            grad_i = single_shot_from_observation(costs[i], directions[i], h_n)
            x_next[sl] = mirror_step(reg, game.sets[i], rule, x[sl], grad_i, gamma_n)
        x = x_next
        _record(trace, n, x, x_star, (gamma_n, 1, h_n), n, record_every, rule)

    trace.final_point = x
    trace.finalize()
    logger.info(f"Single-shot finished: {trace}")
    return trace
