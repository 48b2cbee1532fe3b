"""
Experiment orchestration: seeded learning runs, seed aggregation, rate fits,
estimator studies and the artifacts each run leaves behind.
"""

import logging
import os
import time

import numpy as np
from scipy.stats import linregress

from nashseek.config import BAND_QUANTILES, BIAS_VARIANCE_REPLICATIONS, REFERENCE_ACCEPT_RESIDUAL
from nashseek.estimators import SPSA, empirical_bias_variance, mse_optimal_h, quadratic_target
from nashseek.experiment_config import ExperimentConfig
from nashseek.game_core import monotonicity_constant
from nashseek.mirror_descent import HYPERPLANE_ONLY
from nashseek.oracle import (
    NEReference,
    fit_rate_slope,
    reference_step_size,
    solve_ne_reference,
    vi_residual,
)
from nashseek.sdl import SDL, SINGLE_SHOT, predicted_rate_exponent, run_sdl, run_single_shot_baseline
from nashseek.streams import derive_stream
from nashseek.trace_store import (
    atomic_write_text,
    read_mean_csv,
    read_reference,
    write_bias_variance_csv,
    write_iterates_csv,
    write_mean_csv,
    write_reference,
    write_summary,
    write_trace_csv,
)
from nashseek.visualizer import Visualizer
from nashseek.worker_pool import WorkerPool, resolve_workers

logger = logging.getLogger(__name__)

SUMMARY_MARKER = "# key=value"


def _notify(interface, kind, value):
    if interface is not None:
        interface.send_update(kind, value)


def _sq_dist(x, y):
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return float(np.dot(diff, diff))


# =============================================================================
# Worker task
# =============================================================================

def run_seed(config_dict, seed, x_star):
    """
    One learning run for one seed (runs in a worker process).

    The game is rebuilt from the plain config so nothing unpicklable crosses
    the process boundary.

    Returns:
        dict with 'seed', 'status' ('ok' or 'error'), 'trace' and 'error'.
    """
    result = {'seed': seed, 'status': 'init', 'trace': None, 'error': None}
    try:
        config = ExperimentConfig(**config_dict)
        game = config.build_game()
        common = dict(ref=x_star, seed=seed, record_every=config.record_every, rule=config.update_rule())
        if config.algorithm == SDL:
            trace = run_sdl(game, config.schedules(), game.uniform_start(), config.iters, **common)
        else:
            trace = run_single_shot_baseline(game, config.schedules(), game.uniform_start(), config.iters,
                                             h_exponent=config.h_exponent, **common)
        result['trace'] = trace
        result['status'] = 'ok'
    except Exception as e:
        result['status'] = 'error'
        result['error'] = f"{type(e).__name__}: {e}"
    return result


# =============================================================================
# Aggregation
# =============================================================================

class SeedAggregate:
    """Pointwise mean and central band of squared errors across seeds."""

    def __init__(self, iters, mean, band_lo, band_hi, n_seeds):
        self.iters = iters
        self.mean = mean
        self.band_lo = band_lo
        self.band_hi = band_hi
        self.n_seeds = n_seeds

    def as_curve(self, label, fit=None):
        return {"label": label, "iter": self.iters, "mean": self.mean,
                "band_lo": self.band_lo, "band_hi": self.band_hi, "fit": fit}


def aggregate_seeds(traces, quantiles=BAND_QUANTILES):
    """
    Args:
        traces (list): RunTrace objects or raw squared-error arrays, one per seed,
            all indexed by the same iterations 1..T.
        quantiles (tuple): Lower and upper band percentiles.

    Returns:
        SeedAggregate
    """
    if not traces:
        raise ValueError("Need at least one trace to aggregate")
    curves = [np.asarray(getattr(t, "sq_error", t), dtype=float) for t in traces]
    lengths = {c.size for c in curves}
    if len(lengths) != 1:
        raise ValueError(f"Traces have different lengths: {sorted(lengths)}")

    stacked = np.vstack(curves)
    # seed order is fixed by the caller, so the reduction is deterministic
    mean = stacked.mean(axis=0)
    band_lo, band_hi = np.percentile(stacked, quantiles, axis=0)
    iters = np.arange(1, stacked.shape[1] + 1)
    return SeedAggregate(iters, mean, band_lo, band_hi, stacked.shape[0])


# =============================================================================
# Summaries
# =============================================================================

class ExperimentSummary:
    """Headline numbers of one run; all recomputable from the persisted traces."""

    def __init__(self, run_id, config, beta, aggregate, fit, per_seed_final, negativity_events,
                 evals_per_player, reference_residual, wall_clock, fit_note="", seeds=None,
                 plane_point_gap=None, final_plane_sq_error=None):
        self.run_id = run_id
        self.algorithm = config.algorithm
        self.game = config.game
        self.projection = config.projection
        self.gamma = config.gamma
        self.p = config.p
        self.iters = int(aggregate.iters[-1]) if aggregate.iters.size else 0
        self.n_seeds = aggregate.n_seeds
        self.beta = beta
        self.gamma_beta = config.gamma * beta
        self.gamma_beta_ok = self.gamma_beta > 1.0
        self.predicted_exponent = predicted_rate_exponent(config.p) if config.algorithm == SDL else None
        self.aggregate = aggregate
        self.fit = fit
        self.fit_note = fit_note
        self.per_seed_final = list(per_seed_final)
        self.seeds = list(seeds) if seeds is not None else list(range(len(self.per_seed_final)))
        self.negativity_events = list(negativity_events)
        self.evals_per_player = list(evals_per_player)
        self.reference_residual = reference_residual
        self.wall_clock = wall_clock
        self.plane_point_gap = plane_point_gap
        self.final_plane_sq_error = final_plane_sq_error

    @property
    def final_mean_sq_error(self):
        return float(self.aggregate.mean[-1])

    @property
    def slope(self):
        return None if self.fit is None else self.fit.slope

    def to_dict(self):
        values = {
            "run_id": self.run_id,
            "algorithm": self.algorithm,
            "game": self.game,
            "projection": self.projection,
            "p": f"{self.p:g}",
            "gamma": f"{self.gamma:g}",
            "iters": self.iters,
            "n_seeds": self.n_seeds,
            "beta": f"{self.beta:.10g}",
            "gamma_beta": f"{self.gamma_beta:.10g}",
            "gamma_beta_ok": "yes" if self.gamma_beta_ok else "no",
            "final_mean_sq_error": f"{self.final_mean_sq_error:.10g}",
            "mean_sq_error_avg": f"{float(np.mean(self.aggregate.mean)):.10g}",
            "slope": "" if self.fit is None else f"{self.fit.slope:.6f}",
            "slope_window": "" if self.fit is None else f"{self.fit.window[0]}-{self.fit.window[1]}",
            "slope_r2": "" if self.fit is None else f"{self.fit.r_squared:.6f}",
            "predicted_slope": "" if self.predicted_exponent is None else f"{-self.predicted_exponent:g}",
            "negativity_events": sum(self.negativity_events),
            "plane_point_gap": "" if self.plane_point_gap is None else f"{self.plane_point_gap:.10g}",
            "final_plane_sq_error": "" if self.final_plane_sq_error is None else f"{self.final_plane_sq_error:.10g}",
            "total_cost_evals_per_player": sum(self.evals_per_player),
            "reference_residual": f"{self.reference_residual:.3e}",
            "wall_clock_s": f"{self.wall_clock:.2f}",
        }
        return values

    def to_text(self):
        lines = [
            "=" * 60,
            f"NASHSEEK RUN SUMMARY: {self.run_id}",
            "=" * 60,
            f"Algorithm:        {self.algorithm} (p={self.p:g}, gamma={self.gamma:g}, projection={self.projection})",
            f"Game:             {self.game}",
            f"Iterations:       {self.iters} x {self.n_seeds} seeds",
            f"beta:             {self.beta:.6g}",
            f"gamma * beta:     {self.gamma_beta:.4f} ({'> 1, rate condition holds' if self.gamma_beta_ok else '<= 1, rate condition violated'})",
            f"Final mean error: {self.final_mean_sq_error:.4e}",
        ]
        if self.fit is not None:
            lines.append(f"Fitted slope:     {self.fit}")
        else:
            lines.append(f"Fitted slope:     n/a ({self.fit_note})")
        if self.predicted_exponent is not None:
            lines.append(f"Predicted slope:  {-self.predicted_exponent:g}")
        if self.projection == HYPERPLANE_ONLY:
            lines.append(f"Negativity events per seed: {self.negativity_events}")
        if self.plane_point_gap is not None:
            lines.append(f"Hyperplane fixed point: {self.plane_point_gap:.4e} squared distance from the equilibrium, "
                         f"final mean squared distance to it {self.final_plane_sq_error:.4e}")
        lines.append(f"Cost evaluations per player (all seeds): {sum(self.evals_per_player)}")
        lines.append(f"Reference residual: {self.reference_residual:.3e}")
        lines.append(f"Wall clock: {self.wall_clock:.1f}s")
        lines.append("")
        lines.append("Per-seed final squared error:")
        for seed, err in zip(self.seeds, self.per_seed_final):
            lines.append(f"  seed {seed}: {err:.6e}")
        lines.append("")
        lines.append(SUMMARY_MARKER)
        for key, value in self.to_dict().items():
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


def parse_summary_values(text):
    """Reads back the key=value block of a summary file."""
    if SUMMARY_MARKER not in text:
        raise ValueError("No key=value block in summary")
    block = text.split(SUMMARY_MARKER, 1)[1]
    values = {}
    for line in block.splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


# =============================================================================
# Reference equilibrium
# =============================================================================

def load_reference(path, game):
    """
    Loads a persisted reference and re-certifies it against this game.

    Raises:
        FileNotFoundError: Missing file.
        ValueError: Wrong dimension or residual too large to trust.
    """
    x_star, stored_residual = read_reference(path)
    if x_star.size != game.d:
        raise ValueError(f"Reference in {path} has dimension {x_star.size}, game needs {game.d}")
    tau = reference_step_size(game.jacobian)
    residual = vi_residual(x_star, game.exact_gradient, game.sets, tau)
    if residual > REFERENCE_ACCEPT_RESIDUAL:
        raise ValueError(f"Reference in {path} is not certified for this game "
                         f"(residual {residual:.3e}, stored {stored_residual:.3e})")
    logger.info(f"Loaded reference from {path} (residual {residual:.3e})")
    return NEReference(x_star, residual, None, 0, tau)


def prepare_reference(config):
    """
    Loads config.reference when set, otherwise solves and certifies.

    Always on the reference game's sets: for Cournot in hyperplane mode that
    is still the simplices, so the reference is a feasible equilibrium.
    """
    game = config.build_reference_game()
    if config.reference:
        return load_reference(config.reference, game)
    return solve_ne_reference(game, tol=config.tol, max_iter=config.max_iter)


def prepare_plane_point(config):
    """
    Fixed point of the hyperplane-only dynamics (None outside hyperplane mode).

    It may have negative entries; it is reported next to the equilibrium, never
    scored against.
    """
    if config.projection != HYPERPLANE_ONLY:
        return None
    point = solve_ne_reference(config.build_game(), tol=config.tol, max_iter=config.max_iter, certify=False)
    logger.info(f"Hyperplane fixed point: {point} (min entry {point.x_star.min():.4f})")
    return point


# =============================================================================
# Runs
# =============================================================================

def run_experiment(config, interface=None, reference=None, plane_point=None):
    """
    Runs every seed of one configuration and writes its artifact directory.

    Artifacts in <out>/<run_id>/: config.cfg, reference_ne.txt,
    trace_seed<k>.csv, iterates_seed<k>.csv, mean_curve.csv, summary.txt and
    convergence.svg; hyperplane mode adds plane_fixed_point.txt. Squared
    errors are always measured against reference_ne.txt.

    Args:
        config (ExperimentConfig): Resolved settings.
        interface (ConsoleInterface, optional): Progress sink.
        reference (NEReference, optional): Skip solving (sweeps share one).
        plane_point (NEReference, optional): Hyperplane fixed point, same sharing.

    Returns:
        ExperimentSummary
    """
    start = time.time()
    run_id = config.resolved_run_id()
    out_dir = os.path.join(config.out, run_id)
    os.makedirs(out_dir, exist_ok=True)
    _notify(interface, 'run', run_id)

    atomic_write_text(os.path.join(out_dir, "config.cfg"), config.to_text())

    game = config.build_game()
    beta = monotonicity_constant(game.jacobian)
    if reference is None:
        reference = prepare_reference(config)
    if reference.vi_residual > REFERENCE_ACCEPT_RESIDUAL:
        raise ValueError(f"Refusing to score against an uncertified reference (residual {reference.vi_residual:.3e})")
    write_reference(os.path.join(out_dir, "reference_ne.txt"), reference)
    if plane_point is None:
        plane_point = prepare_plane_point(config)
    if plane_point is not None:
        write_reference(os.path.join(out_dir, "plane_fixed_point.txt"), plane_point)
    _notify(interface, 'log', f"{game} | beta={beta:.4f} | gamma*beta={config.gamma * beta:.3f}")

    seeds = config.seed_values()
    tasks = [(config.to_dict(), seed, reference.x_star) for seed in seeds]
    with WorkerPool(resolve_workers(config.workers)) as pool:
        results = pool.map_ordered(run_seed, tasks)

    failed = [r for r in results if r['status'] != 'ok']
    if failed:
        for r in failed:
            logger.error(f"Seed {r['seed']} failed: {r['error']}")
        raise RuntimeError(f"{len(failed)} of {len(seeds)} seeds failed in {run_id}: {failed[0]['error']}")

    traces = [r['trace'] for r in results]
    for trace in traces:
        write_trace_csv(os.path.join(out_dir, f"trace_seed{trace.seed}.csv"), run_id, trace)
        write_iterates_csv(os.path.join(out_dir, f"iterates_seed{trace.seed}.csv"), trace)

    aggregate = aggregate_seeds(traces)
    write_mean_csv(os.path.join(out_dir, "mean_curve.csv"), aggregate)

    fit, fit_note = None, ""
    try:
        fit = fit_rate_slope(aggregate.mean, aggregate.iters)
    except ValueError as e:
        fit_note = str(e)
        logger.warning(f"No slope for {run_id}: {e}")

    summary = ExperimentSummary(
        run_id, config, beta, aggregate, fit,
        per_seed_final=[float(t.sq_error[-1]) for t in traces],
        negativity_events=[t.negativity_events for t in traces],
        evals_per_player=[int(t.cum_evals[-1]) for t in traces],
        reference_residual=reference.vi_residual,
        wall_clock=time.time() - start,
        fit_note=fit_note,
        seeds=[t.seed for t in traces],
        plane_point_gap=None if plane_point is None else _sq_dist(plane_point.x_star, reference.x_star),
        final_plane_sq_error=None if plane_point is None else float(np.mean(
            [_sq_dist(t.final_point, plane_point.x_star) for t in traces])),
    )
    write_summary(os.path.join(out_dir, "summary.txt"), summary)
    Visualizer(out_dir).save_convergence_plot([aggregate.as_curve(run_id, fit)], "convergence.svg",
                                              title=f"{run_id} ({len(seeds)} seeds)")

    _notify(interface, 'stats', {'runs_completed': 1, 'seeds_completed': len(seeds),
                                 'cost_evaluations': sum(summary.evals_per_player)})
    _notify(interface, 'results', summary.to_text())
    logger.info(f"Run {run_id} done in {summary.wall_clock:.1f}s, artifacts in {out_dir}")
    return summary


def run_sweep(config, p_values=None, with_baseline=False, interface=None):
    """
    SDL over several p on one instance, start point and reference.

    Each point gets its own run directory under <out>/<run_id or 'sweep'>/;
    the comparison plot and sweep_summary.txt sit next to them.

    Returns:
        list[ExperimentSummary]
    """
    p_values = list(p_values or config.p_list or [0.0, 0.5, 1.0])
    sweep_dir = os.path.join(config.out, config.run_id or "sweep")
    os.makedirs(sweep_dir, exist_ok=True)

    base = config.copy(out=sweep_dir, run_id="", p_list=p_values)
    reference = prepare_reference(base)
    write_reference(os.path.join(sweep_dir, "reference_ne.txt"), reference)
    plane_point = prepare_plane_point(base)

    runs = [base.copy(algorithm=SDL, p=p) for p in p_values]
    if with_baseline:
        runs.append(base.copy(algorithm=SINGLE_SHOT))

    summaries = []
    for k, run_config in enumerate(runs, 1):
        logger.info(f"Sweep point {k}/{len(runs)}: {run_config.resolved_run_id()}")
        summaries.append(run_experiment(run_config, interface, reference=reference, plane_point=plane_point))

    curves = [s.aggregate.as_curve(s.run_id, s.fit) for s in summaries]
    Visualizer(sweep_dir).save_convergence_plot(curves, "sweep_comparison.svg", title="Mean squared error across p")

    lines = ["run_id,algorithm,p,slope,predicted_slope,final_mean_sq_error,total_cost_evals_per_player"]
    for s in summaries:
        values = s.to_dict()
        lines.append(",".join(str(values[k]) for k in
                              ("run_id", "algorithm", "p", "slope", "predicted_slope",
                               "final_mean_sq_error", "total_cost_evals_per_player")))
    atomic_write_text(os.path.join(sweep_dir, "sweep_summary.txt"), "\n".join(lines) + "\n")
    return summaries


def solve_reference(config, out_dir=None):
    """Solves, certifies and writes reference_ne.txt for the configured game."""
    game = config.build_reference_game()
    reference = solve_ne_reference(game, tol=config.tol, max_iter=config.max_iter)
    out_dir = out_dir or config.out
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "reference_ne.txt")
    write_reference(path, reference)
    return reference, path


def plot_runs(run_dirs, out_path, log_axes=True):
    """Re-renders persisted mean curves (one per run directory) into one SVG."""
    curves = []
    for run_dir in run_dirs:
        path = os.path.join(run_dir, "mean_curve.csv")
        if not os.path.exists(path):
            raise FileNotFoundError(f"No mean_curve.csv in {run_dir}")
        data = read_mean_csv(path)
        try:
            fit = fit_rate_slope(data["mean_sq_error"], data["iter"])
        except ValueError as e:
            logger.warning(f"No slope for {run_dir}: {e}")
            fit = None
        curves.append({"label": os.path.basename(os.path.normpath(run_dir)), "iter": data["iter"],
                       "mean": data["mean_sq_error"], "band_lo": data["band_lo"],
                       "band_hi": data["band_hi"], "fit": fit})
    out_dir, filename = os.path.split(os.path.abspath(out_path))
    return Visualizer(out_dir).save_convergence_plot(curves, filename, log_axes=log_axes)


# =============================================================================
# Estimator studies
# =============================================================================

def variance_slopes(rows, estimator=SPSA):
    """
    Log-log slopes of empirical variance: against ell at each fixed h and
    against h at each fixed ell.
    """
    sel = [r for r in rows if r["estimator"] == estimator]
    slopes = {"vs_ell": {}, "vs_h": {}}
    for h in sorted({r["h"] for r in sel}):
        pts = sorted((r["ell"], r["variance"]) for r in sel if r["h"] == h)
        if len(pts) >= 2 and len({p[0] for p in pts}) >= 2:
            slopes["vs_ell"][h] = float(linregress(np.log([p[0] for p in pts]), np.log([p[1] for p in pts])).slope)
    for ell in sorted({r["ell"] for r in sel}):
        pts = sorted((r["h"], r["variance"]) for r in sel if r["ell"] == ell)
        if len(pts) >= 2:
            slopes["vs_h"][ell] = float(linregress(np.log([p[0] for p in pts]), np.log([p[1] for p in pts])).slope)
    return slopes


def run_bias_variance_grid(h_values, ell_values, replications=BIAS_VARIANCE_REPLICATIONS, seed=0,
                           out_dir=None, noise_halfwidth=1.0, estimators=(SPSA,), weights=(1.0, 2.0, 3.0, 4.0),
                           x=None):
    """
    Monte Carlo bias/variance/MSE over an (h, ell) grid on a noisy quadratic.

    Each cell draws from its own stream (seed, estimator, h index, ell index),
    so cells are independent of grid order.

    Returns:
        (rows, slopes) where slopes maps estimator -> variance_slopes().
    """
    evaluate, gradient = quadratic_target(weights, noise_halfwidth)
    x = np.zeros(len(weights)) if x is None else np.asarray(x, dtype=float)
    true_grad = gradient(x)

    rows = []
    for e, kind in enumerate(estimators):
        for a, h in enumerate(h_values):
            for b, ell in enumerate(ell_values):
                rng = derive_stream(seed, e, a, b)
                report = empirical_bias_variance(kind, evaluate, x, true_grad, h, ell, replications, rng)
                rows.append({"estimator": kind, "h": float(h), "ell": int(ell),
                             "bias_norm": report.empirical_bias_norm, "variance": report.empirical_variance,
                             "mse": report.mse, "replications": replications,
                             "h_mse_optimal": mse_optimal_h(ell)})
                logger.debug(f"{kind} h={h:g} ell={ell}: {report}")

    slopes = {kind: variance_slopes(rows, kind) for kind in estimators}
    for kind, s in slopes.items():
        logger.info(f"{kind}: variance slope vs ell {s['vs_ell']}, vs h {s['vs_h']}")

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_bias_variance_csv(os.path.join(out_dir, "bias_variance.csv"), rows)
        Visualizer(out_dir).save_bias_variance_plot([r for r in rows if r["estimator"] == estimators[0]],
                                                    "bias_variance.svg")
    return rows, slopes
