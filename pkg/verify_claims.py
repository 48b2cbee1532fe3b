"""
Desk-scale checks of the headline claims: estimator bias and variance orders,
prox bounds, projection correctness, reference certification, convergence
rates, the single-shot comparison, information isolation and replay.

Usage:
    python3 verify_claims.py [--skip-heavy] [--out DIR] [--workers W]

The heavy checks (rate slopes and the baseline comparison) run 20 seeds of
the 20-firm instance and take minutes.
"""

import argparse
import logging
import os
import sys
import time
from itertools import combinations

import numpy as np

sys.path.append(os.getcwd())

from nashseek.config import PRESETS_DIR
from nashseek.estimators import SPSA, cubic_target, empirical_bias_variance, quadratic_target
from nashseek.experiment_config import ExperimentConfig
from nashseek.game_core import (
    GameInstance,
    StrategySet,
    cournot_game,
    duopoly_params,
    generate_cournot_instance,
    separable_game,
)
from nashseek.harness import run_bias_variance_grid, run_experiment
from nashseek.mirror_descent import EuclideanRegularizer, check_prox_bounds, project_simplex
from nashseek.oracle import solve_ne_reference
from nashseek.sdl import Schedules, run_sdl
from nashseek.streams import derive_stream

logging.basicConfig(
    level=logging.WARNING,
    format='%(asctime)s - [NASHSEEK] - %(message)s',
    datefmt='%H:%M:%S'
)
logger = logging.getLogger("NashSeek_Verify")

results = []


def check(name, passed, detail=""):
    results.append((name, passed))
    status = "[PASS]" if passed else "[FAIL]"
    print(f"{status} {name}: {detail}")


def spsa_unbiased():
    evaluate, gradient = quadratic_target([1.0, 2.0, 3.0, 4.0], noise_halfwidth=1.0)
    x = np.array([0.5, -0.2, 0.1, 0.3])
    report = empirical_bias_variance(SPSA, evaluate, x, gradient(x), 0.1, 1, 100000, derive_stream(1))
    worst = float(np.max(np.abs(report.bias_vector) / report.standard_errors))
    check("SPSA unbiased on a noisy quadratic", worst < 4.0, f"max |bias|/SE = {worst:.2f}")


def variance_orders(out_dir):
    _, slopes = run_bias_variance_grid([0.02, 0.04, 0.08, 0.16, 0.32], [1, 2, 4, 8, 16, 32, 64],
                                       replications=2000, seed=2, out_dir=out_dir)
    vs_ell = list(slopes[SPSA]["vs_ell"].values())
    vs_h = list(slopes[SPSA]["vs_h"].values())
    check("Variance ~ 1/ell", all(abs(s + 1.0) <= 0.1 for s in vs_ell), f"slopes {np.round(vs_ell, 3)}")
    check("Variance ~ 1/h^2", all(abs(s + 2.0) <= 0.2 for s in vs_h), f"slopes {np.round(vs_h, 3)}")


def cubic_bias():
    evaluate, gradient = cubic_target()
    x = np.array([1.0])
    ratios = []
    for h in (0.05, 0.1):
        report = empirical_bias_variance(SPSA, evaluate, x, gradient(x), h, 1, 1000000, derive_stream(3))
        ratios.append(float(report.bias_vector[0] / h ** 2))
    check("Bias ~ h^2 on x^3", all(0.85 <= r <= 1.15 for r in ratios), f"bias/h^2 = {np.round(ratios, 4)}")


def prox_bounds():
    rng = np.random.default_rng(4)
    reg = EuclideanRegularizer()
    reports = [check_prox_bounds(reg, s, 10000, rng)
               for s in (StrategySet.simplex(5), StrategySet.box(-np.ones(4), np.ones(4)))]
    check("Prox bounds, 1e4 trials per set", all(r.passed for r in reports), "; ".join(str(r) for r in reports))


def projection_oracle():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        y = rng.normal(scale=2.0, size=int(rng.integers(1, 7)))
        best, best_dist = None, np.inf
        for k in range(1, y.size + 1):
            for support in combinations(range(y.size), k):
                idx = list(support)
                x = np.zeros_like(y)
                x[idx] = y[idx] - (y[idx].sum() - 1.0) / k
                if np.all(x >= -1e-15) and np.sum((x - y) ** 2) < best_dist:
                    best, best_dist = x, np.sum((x - y) ** 2)
        worst = max(worst, float(np.max(np.abs(project_simplex(y) - best))))
    check("Simplex projection vs enumeration", worst < 1e-8, f"max deviation {worst:.2e}")


def reference_certified():
    game = cournot_game(generate_cournot_instance(20, 5, 2021))
    ref = solve_ne_reference(game)
    rng = np.random.default_rng(6)
    other = solve_ne_reference(game, x0=np.concatenate([s.sample_point(rng) for s in game.sets]), certify=False)
    gap = float(np.max(np.abs(ref.x_star - other.x_star)))
    ok = ref.vi_residual <= 1e-8 and ref.max_improvement <= 1e-6 and gap <= 1e-7
    check("Reference equilibrium certified", ok,
          f"residual {ref.vi_residual:.1e}, improvement {ref.max_improvement:.1e}, start gap {gap:.1e}")


def duopoly_convergence():
    game = cournot_game(duopoly_params(5, 1, 3), StrategySet.BOX)
    trace = run_sdl(game, Schedules(1.5), game.uniform_start(), 10000, ref=np.full(2, 2.0 / 3.0), seed=0,
                    record_every=10000)
    check("Noiseless duopoly converges", trace.sq_error[-1] < 1e-3, f"final error {trace.sq_error[-1]:.2e}")


def information_isolation():
    def rescaled(game, player, factor):
        scale = np.ones(game.num_players)
        scale[player] = factor
        return GameInstance(game.name, game.dims, game.sets, game.noisy_cost,
                            sample_game=lambda x, rng: game.sample_costs(x, rng) * scale,
                            sample_batch=lambda points, rng: game.sample_costs_batch(points, rng) * scale,
                            jacobian=game.jacobian)

    rng = np.random.default_rng(7)
    cournot = cournot_game(generate_cournot_instance(5, 3, 9))
    separable = separable_game(5, 3, seed=9)
    ok = True
    for game, T in ((cournot, 1), (separable, 200)):
        base = run_sdl(game, Schedules(1.5), game.uniform_start(), T, seed=8)
        for _ in range(5):
            other = run_sdl(rescaled(game, int(rng.integers(1, 5)), float(rng.uniform(0.1, 10))),
                            Schedules(1.5), game.uniform_start(), T, seed=8)
            ok &= all(np.array_equal(a[game.slices[0]], b[game.slices[0]])
                      for (_, a), (_, b) in zip(base.iterates, other.iterates))
    check("Rival rescaling leaves player 0 bit-identical", ok, "5 rescalings, coupled and separable games")


def rate_slopes(out_dir, workers):
    p0 = ExperimentConfig.from_file(os.path.join(PRESETS_DIR, "cournot_p0.cfg")).copy(out=out_dir, workers=workers)
    p1 = ExperimentConfig.from_file(os.path.join(PRESETS_DIR, "cournot_p1.cfg")).copy(out=out_dir, workers=workers)
    shot = ExperimentConfig.from_file(os.path.join(PRESETS_DIR, "cournot_single_shot.cfg")).copy(
        out=out_dir, workers=workers)

    s0 = run_experiment(p0)
    s1 = run_experiment(p1)
    check("SDL p=0 slope in [-0.7, -0.35]", s0.slope is not None and -0.7 <= s0.slope <= -0.35, f"{s0.slope}")
    check("SDL p=1 slope in [-1.25, -0.75]", s1.slope is not None and -1.25 <= s1.slope <= -0.75, f"{s1.slope}")
    check("p=1 steeper than p=0", s1.slope is not None and s0.slope is not None and s1.slope < s0.slope,
          f"{s1.slope} vs {s0.slope}")

    ss = run_experiment(shot)
    ok = (ss.final_mean_sq_error > s0.final_mean_sq_error and ss.slope is not None
          and ss.slope >= s0.slope + 0.05)
    check("Single-shot slower than SDL p=0", ok,
          f"final {ss.final_mean_sq_error:.3e} vs {s0.final_mean_sq_error:.3e}, slope {ss.slope} vs {s0.slope}")


def replay(out_dir):
    config = ExperimentConfig(game="duopoly", noise=True, gamma=1.5, iters=2000, seeds=2, workers=1,
                              out=os.path.join(out_dir, "replay_a"), run_id="replay")
    run_experiment(config)
    run_dir = os.path.join(out_dir, "replay_a", "replay")
    persisted = ExperimentConfig.from_file(os.path.join(run_dir, "config.cfg"))
    run_experiment(persisted.copy(out=os.path.join(out_dir, "replay_b")))
    same = True
    for seed in persisted.seed_values():
        name = f"trace_seed{seed}.csv"
        with open(os.path.join(run_dir, name), "rb") as a, \
                open(os.path.join(out_dir, "replay_b", "replay", name), "rb") as b:
            same &= a.read() == b.read()
    check("Persisted config replays bit-identically", same, run_dir)


def main():
    parser = argparse.ArgumentParser(description="Desk-scale claim checks")
    parser.add_argument("--skip-heavy", action="store_true", help="Skip the 20-seed rate runs")
    parser.add_argument("--out", default=os.path.join("output", "verify"))
    parser.add_argument("--workers", type=int, default=4)
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)

    print("=" * 60)
    print("   NashSeek - claim verification")
    print("=" * 60)
    start = time.time()

    spsa_unbiased()
    variance_orders(args.out)
    cubic_bias()
    prox_bounds()
    projection_oracle()
    reference_certified()
    duopoly_convergence()
    information_isolation()
    if args.skip_heavy:
        print("[SKIP] Rate slopes and baseline comparison (--skip-heavy)")
    else:
        rate_slopes(args.out, args.workers)
    replay(args.out)

    passed = sum(1 for _, ok in results if ok)
    print("=" * 60)
    print(f"   {passed}/{len(results)} checks passed in {time.time() - start:.0f}s")
    print("=" * 60)
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
