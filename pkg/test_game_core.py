import sys
import os

import numpy as np

# Add current directory to path
sys.path.append(os.getcwd())

from nashseek.game_core import (
    StrategySet,
    GameInstance,
    CournotParams,
    NotStronglyMonotoneError,
    generate_cournot_instance,
    cournot_game,
    cournot_expected_cost,
    cournot_exact_gradient,
    cournot_jacobian,
    cournot_noisy_cost,
    cournot_sample_batch,
    cournot_sample_game,
    compute_beta,
    monotonicity_constant,
    duopoly_params,
    separable_game,
)
from nashseek.streams import derive_stream


def test_instance_is_deterministic():
    p1 = generate_cournot_instance(20, 5, 2021)
    p2 = generate_cournot_instance(20, 5, 2021)
    assert np.array_equal(p1.c, p2.c) and np.array_equal(p1.a, p2.a) and np.array_equal(p1.b, p2.b)
    assert p1.c.shape == (20, 5) and p1.d == 100
    assert np.all((p1.c >= 3) & (p1.c <= 4))
    assert np.all((p1.a >= 4) & (p1.a <= 5))
    assert np.all((p1.b >= 0.5) & (p1.b <= 0.55))
    assert np.allclose(p1.price_noise_halfwidth, p1.a / 8)
    assert np.allclose(p1.cost_noise_halfwidth, p1.c / 8)
    print("[OK] Instance generation is deterministic and in range")


def test_instance_rejects_bad_sizes():
    for N, m in ((1, 5), (0, 5), (3, 0)):
        try:
            generate_cournot_instance(N, m, 0)
        except ValueError:
            continue
        raise AssertionError(f"N={N}, m={m} should be rejected")
    print("[OK] N < 2 and m < 1 rejected")


def test_expected_cost_is_mean_of_draws():
    params = generate_cournot_instance(4, 3, 7)
    game = cournot_game(params)
    rng = np.random.default_rng(1)
    x = np.concatenate([s.sample_point(rng) for s in game.sets])
    draws = np.array([game.sample_costs(x, rng) for _ in range(20000)])
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(draws.shape[0])
    expected = np.array([cournot_expected_cost(params, i, x) for i in range(params.N)])
    assert np.all(np.abs(mean - expected) < 4 * se + 1e-12)
    print("[OK] Noisy costs are unbiased for the expected cost")


def test_exact_gradient_and_jacobian():
    params = generate_cournot_instance(3, 2, 11)
    rng = np.random.default_rng(2)
    x = rng.uniform(0, 1, size=params.d)
    phi = cournot_exact_gradient(params, x)

    # own partials by central differences of the (quadratic) expected cost
    eps = 1e-5
    for i in range(params.N):
        for j in range(params.m):
            k = i * params.m + j
            e = np.zeros(params.d)
            e[k] = eps
            fd = (cournot_expected_cost(params, i, x + e) - cournot_expected_cost(params, i, x - e)) / (2 * eps)
            assert abs(fd - phi[k]) < 1e-7

    J = cournot_jacobian(params)
    y = rng.uniform(0, 1, size=params.d)
    assert np.allclose(cournot_exact_gradient(params, y) - phi, J @ (y - x), atol=1e-12)
    print("[OK] Exact gradient and Jacobian agree with the costs")


def test_beta_matches_dense_check():
    params = generate_cournot_instance(6, 4, 3)
    beta = compute_beta(params)
    assert abs(beta - monotonicity_constant(cournot_jacobian(params))) < 1e-10
    # each market block b_j (I + 11') has smallest eigenvalue b_j
    assert abs(beta - 2 * params.b.min()) < 1e-10
    print(f"[OK] beta = {beta:.6f} = 2 min b_j")


def test_not_strongly_monotone():
    try:
        monotonicity_constant(np.array([[1.0, 0.0], [0.0, -0.5]]))
    except NotStronglyMonotoneError:
        print("[OK] Non-monotone Jacobian rejected")
        return
    raise AssertionError("expected NotStronglyMonotoneError")


def test_sample_game_shares_price_shock():
    base = generate_cournot_instance(3, 2, 5)
    params = CournotParams(base.a, base.b, base.c, cost_noise_halfwidth=0.0)
    x = np.full(params.d, 0.5)
    rng = np.random.default_rng(4)
    costs = cournot_sample_game(params, x, rng)
    expected = np.array([cournot_expected_cost(params, i, x) for i in range(params.N)])
    deviation = costs - expected
    # identical quantities, one shared zeta: every firm sees the same shock
    assert np.allclose(deviation, deviation[0], atol=1e-12)
    assert abs(deviation[0]) > 0
    print("[OK] One realization shares the price shock across firms")


def test_strategy_sets():
    simplex = StrategySet.simplex(3)
    assert simplex.contains([0.2, 0.3, 0.5])
    assert not simplex.contains([0.6, 0.6, -0.2])
    plane = StrategySet.hyperplane(3)
    assert plane.contains([0.6, 0.6, -0.2])
    box = StrategySet.box([0, 0], [1, 2])
    assert box.contains([1.0, 2.0]) and not box.contains([1.1, 0.0])
    assert not simplex.contains([0.5, 0.5])
    for bad in (lambda: StrategySet.simplex(0), lambda: StrategySet.box([1], [0]),
                lambda: StrategySet("ball", 2)):
        try:
            bad()
        except ValueError:
            continue
        raise AssertionError("bad strategy set accepted")
    rng = np.random.default_rng(0)
    for s in (simplex, plane, box):
        assert s.contains(s.sample_point(rng)) and s.contains(s.uniform_point())
    print("[OK] Strategy set membership and sampling")


def test_game_needs_two_players():
    try:
        GameInstance("solo", [2], [StrategySet.simplex(2)], lambda i, x, rng: 0.0)
    except ValueError:
        print("[OK] Single-player game rejected")
        return
    raise AssertionError("expected ValueError")


def test_duopoly_and_separable_builtins():
    params = duopoly_params(5, 1, 3)
    game = cournot_game(params, StrategySet.BOX)
    x_star = np.full(2, 2.0 / 3.0)
    assert np.allclose(game.exact_gradient(x_star), 0.0, atol=1e-12)

    sep = separable_game(3, 2, seed=9)
    y = np.random.default_rng(0).uniform(-1, 1, size=sep.d)
    moved = y.copy()
    moved[sep.slices[1]] += 3.0
    # player 0's cost ignores the rivals
    assert sep.expected_cost(0, y) == sep.expected_cost(0, moved)
    print("[OK] Built-in duopoly equilibrium and separable costs")


def test_streams():
    a = derive_stream(5, 1, 2).random(4)
    b = derive_stream(5, 1, 2).random(4)
    c = derive_stream(5, 2, 1).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    try:
        derive_stream(5, -1)
    except ValueError:
        print("[OK] Streams are reproducible and path-dependent")
        return
    raise AssertionError("negative path accepted")


def test_batch_sampler_matches_row_by_row():
    params = generate_cournot_instance(4, 3, 7)
    points = np.random.default_rng(0).uniform(0, 1, size=(6, params.d))
    batch = cournot_sample_batch(params, points, np.random.default_rng(3))
    rng = np.random.default_rng(3)
    rows = np.array([cournot_sample_game(params, p, rng) for p in points])
    assert batch.shape == (6, params.N)
    assert np.array_equal(batch, rows)

    game = cournot_game(params)
    assert np.array_equal(game.sample_costs_batch(points, np.random.default_rng(3)), rows)
    # games without a batch sampler fall back to row-by-row draws
    plain = GameInstance(game.name, game.dims, game.sets, game.noisy_cost,
                         sample_game=lambda x, rng_: cournot_sample_game(params, x, rng_))
    assert np.array_equal(plain.sample_costs_batch(points, np.random.default_rng(3)), rows)
    print("[OK] Batched draws equal row-by-row draws from the same stream")


def test_noisy_cost_examples():
    params = generate_cournot_instance(3, 2, 5)
    rng = np.random.default_rng(8)
    x = rng.uniform(0, 1, size=params.d)
    x[2:4] = 0.0
    for _ in range(100):
        assert cournot_noisy_cost(params, 1, x, rng) == 0.0

    duo = duopoly_params(5, 1, 3, noise=False)
    point = np.array([0.5, 0.5])
    assert abs(cournot_noisy_cost(duo, 0, point, rng) + 0.5) < 1e-15
    assert abs(cournot_expected_cost(duo, 0, point) + 0.5) < 1e-15
    assert cournot_expected_cost(params, 0, np.zeros(params.d)) == 0.0
    print("[OK] Zero quantity costs nothing; duopoly cost at (0.5, 0.5) is -0.5")


def test_sampled_strong_monotonicity():
    params = generate_cournot_instance(20, 5, 2021)
    game = cournot_game(params)
    beta = compute_beta(params)
    rng = np.random.default_rng(12)
    for _ in range(1000):
        x = np.concatenate([s.sample_point(rng) for s in game.sets])
        y = np.concatenate([s.sample_point(rng) for s in game.sets])
        lhs = np.dot(game.exact_gradient(x) - game.exact_gradient(y), x - y)
        assert lhs >= 0.5 * beta * np.dot(x - y, x - y) - 1e-9
    print("[OK] Strong monotonicity holds on 1000 random pairs")


def test_own_cost_midpoint_convexity():
    params = generate_cournot_instance(5, 3, 13)
    game = cournot_game(params)
    rng = np.random.default_rng(14)
    for _ in range(500):
        i = int(rng.integers(params.N))
        sl = game.slices[i]
        x = np.concatenate([s.sample_point(rng) for s in game.sets])
        u, v = x.copy(), x.copy()
        u[sl] = game.sets[i].sample_point(rng)
        v[sl] = game.sets[i].sample_point(rng)
        mid = 0.5 * (u + v)
        f_u, f_v = cournot_expected_cost(params, i, u), cournot_expected_cost(params, i, v)
        assert cournot_expected_cost(params, i, mid) <= 0.5 * (f_u + f_v) + 1e-9
    print("[OK] Each firm's cost is convex in its own quantities")


def test_beta_scales_with_b():
    params = generate_cournot_instance(6, 4, 3)
    beta = compute_beta(params)
    for t in (0.5, 2.0, 7.5):
        scaled = CournotParams(params.a, t * params.b, params.c)
        assert abs(compute_beta(scaled) - t * beta) < 1e-10 * t
    assert abs(compute_beta(duopoly_params(5, 1, 3)) - 2.0) < 1e-12
    print("[OK] beta is linear in b; duopoly b=1 gives beta=2")


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
