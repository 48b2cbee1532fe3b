import sys
import os
from itertools import combinations

import numpy as np

# Add current directory to path
sys.path.append(os.getcwd())

from nashseek.game_core import StrategySet
from nashseek.mirror_descent import (
    Regularizer,
    EuclideanRegularizer,
    UpdateRule,
    FULL_SET,
    HYPERPLANE_ONLY,
    bregman_divergence,
    project_simplex,
    project_box,
    project_hyperplane,
    project_onto,
    mirror_step,
    check_prox_bounds,
)


def brute_force_simplex(y):
    """Closest point over every candidate support (active-set enumeration)."""
    best, best_dist = None, np.inf
    for k in range(1, y.size + 1):
        for support in combinations(range(y.size), k):
            idx = list(support)
            x = np.zeros_like(y)
            x[idx] = y[idx] - (y[idx].sum() - 1.0) / k
            if np.all(x >= -1e-15):
                dist = np.sum((x - y) ** 2)
                if dist < best_dist:
                    best, best_dist = x, dist
    return best


def test_simplex_projection_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        dim = int(rng.integers(1, 7))
        y = rng.normal(scale=2.0, size=dim)
        assert np.max(np.abs(project_simplex(y) - brute_force_simplex(y))) < 1e-8
    print("[OK] Simplex projection matches active-set enumeration")


def test_simplex_projection_fixed_points():
    x = np.array([0.2, 0.3, 0.5])
    assert np.allclose(project_simplex(x), x)
    assert np.allclose(project_simplex(np.array([5.0, 0.0, 0.0])), [1.0, 0.0, 0.0])
    assert np.allclose(project_simplex(np.array([1.0, 1.0])), [0.5, 0.5])
    assert np.allclose(project_simplex(np.array([3.0, 1.0]), total=2.0), [2.0, 0.0])
    print("[OK] Simplex projection fixed points")


def test_box_and_hyperplane_projections():
    assert np.array_equal(project_box(np.array([-1.0, 0.5, 3.0]), 0.0, 2.0), [0.0, 0.5, 2.0])
    z = project_hyperplane(np.array([3.0, -1.0, 0.5]))
    assert abs(z.sum() - 1.0) < 1e-12
    print("[OK] Box clipping and hyperplane shift")


def test_full_set_step_stays_feasible():
    rng = np.random.default_rng(1)
    reg = EuclideanRegularizer()
    rule = UpdateRule(FULL_SET)
    sets = [StrategySet.simplex(4), StrategySet.box(np.zeros(3), np.ones(3))]
    for s in sets:
        for _ in range(200):
            x = s.sample_point(rng)
            g = rng.normal(scale=10.0, size=s.dimension)
            assert s.contains(mirror_step(reg, s, rule, x, g, 0.7))
    print("[OK] FullSet mirror steps stay feasible")


def test_hyperplane_only_closed_form():
    reg = EuclideanRegularizer()
    s = StrategySet.simplex(3)
    x = np.array([0.1, 0.1, 0.8])
    g = np.array([5.0, -1.0, 0.0])
    out = mirror_step(reg, s, UpdateRule(HYPERPLANE_ONLY), x, g, 0.5)
    step = 0.5 * g
    assert np.allclose(out, x - step + step.sum() / 3)
    assert abs(out.sum() - 1.0) < 1e-12
    assert np.any(out < 0)
    print("[OK] HyperplaneOnly step keeps the sum and may leave the orthant")


def test_mirror_step_rejects_bad_input():
    reg = EuclideanRegularizer()
    s = StrategySet.simplex(2)
    for call in (lambda: mirror_step(reg, s, UpdateRule(), np.array([0.5, 0.5]), np.zeros(2), 0.0),
                 lambda: mirror_step(reg, s, UpdateRule(), np.array([0.9, 0.9]), np.zeros(2), 0.1),
                 lambda: UpdateRule("mirror")):
        try:
            call()
        except ValueError:
            continue
        raise AssertionError("bad mirror step accepted")
    print("[OK] gamma <= 0, infeasible x and unknown modes rejected")


def test_prox_bounds_hold():
    rng = np.random.default_rng(2)
    reg = EuclideanRegularizer()
    for s in (StrategySet.simplex(5), StrategySet.box(-np.ones(4), 2 * np.ones(4))):
        report = check_prox_bounds(reg, s, 10000, rng)
        assert report.passed, str(report)
    print("[OK] Prox bounds hold on simplex and box")


class _SquaredNorm(Regularizer):
    name = "squared-norm"

    def value(self, x):
        return 0.5 * float(np.dot(x, x))

    def grad(self, x):
        return np.asarray(x, dtype=float)


def test_generic_divergence_matches_euclidean():
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=4), rng.normal(size=4)
    assert abs(bregman_divergence(_SquaredNorm(), x, y) - bregman_divergence(EuclideanRegularizer(), x, y)) < 1e-12
    assert abs(bregman_divergence(EuclideanRegularizer(), x, y) - 0.5 * np.sum((x - y) ** 2)) < 1e-12
    try:
        _SquaredNorm().prox(StrategySet.simplex(4), x, y)
    except NotImplementedError:
        pass
    else:
        raise AssertionError("abstract prox should not be available")
    try:
        bregman_divergence(EuclideanRegularizer(), x, y[:3])
    except ValueError:
        print("[OK] Bregman divergence from value and gradient")
        return
    raise AssertionError("dimension mismatch accepted")


def test_projections_are_non_expansive():
    rng = np.random.default_rng(9)
    reg = EuclideanRegularizer()
    rule = UpdateRule(FULL_SET)
    sets = [StrategySet.simplex(5), StrategySet.box(-np.ones(4), np.ones(4)), StrategySet.hyperplane(3)]
    for s in sets:
        for _ in range(10000):
            u = rng.normal(scale=3.0, size=s.dimension)
            v = rng.normal(scale=3.0, size=s.dimension)
            assert np.linalg.norm(project_onto(s, u) - project_onto(s, v)) <= np.linalg.norm(u - v) + 1e-12
    s = StrategySet.simplex(5)
    for _ in range(10000):
        x, y = s.sample_point(rng), s.sample_point(rng)
        gx, gy = rng.normal(scale=5.0, size=5), rng.normal(scale=5.0, size=5)
        gap = np.linalg.norm(mirror_step(reg, s, rule, x, gx, 0.3) - mirror_step(reg, s, rule, y, gy, 0.3))
        assert gap <= np.linalg.norm((x - 0.3 * gx) - (y - 0.3 * gy)) + 1e-12
    print("[OK] Projections and FullSet steps are non-expansive over 1e4 pairs")


if __name__ == "__main__":
    tests = [v for k, v in list(globals().items()) if k.startswith("test_") and callable(v)]
    failed = 0
    for test in tests:
        try:
            test()
        except Exception as e:
            failed += 1
            print(f"[FAIL] {test.__name__}: {e}")
    print(f"\n{len(tests) - failed}/{len(tests)} passed")
    sys.exit(1 if failed else 0)
