import sys
import os
from unittest.mock import patch

import numpy as np

# Add current directory to path
sys.path.append(os.getcwd())

import nashseek.sdl as sdl
from nashseek.game_core import (
    GameInstance,
    StrategySet,
    cournot_game,
    duopoly_params,
    generate_cournot_instance,
    separable_game,
)
from nashseek.mirror_descent import UpdateRule, HYPERPLANE_ONLY
from nashseek.sdl import (
    Schedules,
    NonFiniteObservation,
    schedules_at,
    predicted_rate_exponent,
    run_sdl,
    run_single_shot_baseline,
)


def rescaled(game, player, factor):
    """Same game, but one player's observed costs are multiplied by factor."""
    scale = np.ones(game.num_players)
    scale[player] = factor
    return GameInstance(game.name, game.dims, game.sets, game.noisy_cost,
                        sample_game=lambda x, rng: game.sample_costs(x, rng) * scale,
                        sample_batch=lambda points, rng: game.sample_costs_batch(points, rng) * scale,
                        expected_cost=game.expected_cost, exact_gradient=game.exact_gradient,
                        jacobian=game.jacobian)


def test_schedules():
    s = Schedules(gamma=0.5, ell0=1, p=1.0, h0=0.2)
    assert schedules_at(s, 1) == (0.5, 1, 0.2)
    gamma_n, ell_n, h_n = s.at(16)
    assert gamma_n == 0.5 / 16 and ell_n == 16 and abs(h_n - 0.05) < 1e-15
    assert Schedules(1.0, 2, 0.5).at(10)[1] == 7  # ceil(2 * sqrt(10))
    assert Schedules(1.0, 1, 0.0).at(1000)[1] == 1
    for bad in (lambda: schedules_at(s, 0), lambda: Schedules(0.0), lambda: Schedules(1.0, 0),
                lambda: Schedules(1.0, 1, -0.5), lambda: Schedules(1.0, 1, 0.0, 0.0)):
        try:
            bad()
        except ValueError:
            continue
        raise AssertionError("bad schedule accepted")
    print("[OK] Schedule values and validation")


def test_predicted_rate_exponent():
    assert predicted_rate_exponent(0.0) == 0.5
    assert predicted_rate_exponent(1.0) == 1.0
    assert predicted_rate_exponent(3.0) == 1.0
    print("[OK] Predicted exponents")


def test_evaluation_accounting():
    game = cournot_game(generate_cournot_instance(3, 2, 1))
    s = Schedules(0.5, 1, 0.5, 0.1)
    trace = run_sdl(game, s, game.uniform_start(), 40, seed=3)
    expected = np.cumsum([2 * s.at(n)[1] for n in range(1, 41)])
    assert np.array_equal(trace.cum_evals, expected)
    assert [row[1] for row in trace.schedule_log] == [s.at(n)[1] for n in range(1, 41)]
    print(f"[OK] Cost evaluations per player = 2 sum ell_n = {expected[-1]}")


def test_reproducible_and_seed_dependent():
    game = cournot_game(generate_cournot_instance(4, 3, 2))
    s = Schedules(0.5)
    x0 = game.uniform_start()
    ref = np.zeros(game.d)
    a = run_sdl(game, s, x0, 300, ref=ref, seed=11)
    b = run_sdl(game, s, x0, 300, ref=ref, seed=11)
    c = run_sdl(game, s, x0, 300, ref=ref, seed=12)
    assert np.array_equal(a.sq_error, b.sq_error) and np.array_equal(a.final_point, b.final_point)
    assert not np.array_equal(a.final_point, c.final_point)
    print("[OK] Same seed, same trace; different seed, different trace")


def test_full_set_iterates_feasible():
    game = cournot_game(generate_cournot_instance(3, 4, 5))
    trace = run_sdl(game, Schedules(2.0, 1, 0.0, 0.3), game.uniform_start(), 200, seed=0)
    assert len(trace.iterates) == 200
    for _, x in trace.iterates:
        assert game.is_feasible(x)
    assert trace.negativity_events == 0
    print("[OK] FullSet iterates stay in every simplex")


def test_hyperplane_mode_keeps_sums():
    params = generate_cournot_instance(3, 4, 5)
    game = cournot_game(params, StrategySet.HYPERPLANE)
    trace = run_sdl(game, Schedules(20.0, 1, 0.0, 0.3), game.uniform_start(), 100, seed=0,
                    rule=UpdateRule(HYPERPLANE_ONLY))
    for _, x in trace.iterates:
        sums = x.reshape(params.N, params.m).sum(axis=1)
        assert np.allclose(sums, 1.0, atol=1e-9)
    assert trace.negativity_events > 0
    print(f"[OK] Hyperplane mode keeps sums, {trace.negativity_events} negativity events")


def test_noiseless_duopoly_converges():
    game = cournot_game(duopoly_params(5, 1, 3, noise=False), StrategySet.BOX)
    x_star = np.full(2, 2.0 / 3.0)
    trace = run_sdl(game, Schedules(1.5, 1, 0.0, 0.1), game.uniform_start(), 10000, ref=x_star, seed=0,
                    record_every=1000)
    assert trace.sq_error[-1] < 1e-3, trace.sq_error[-1]
    assert trace.sq_error[-1] < trace.sq_error[0]
    print(f"[OK] Duopoly final squared error {trace.sq_error[-1]:.2e}")


def test_information_isolation_coupled_game_first_step():
    game = cournot_game(generate_cournot_instance(4, 3, 8))
    base = run_sdl(game, Schedules(0.5), game.uniform_start(), 1, seed=21)
    rng = np.random.default_rng(0)
    for _ in range(5):
        rival = int(rng.integers(1, 4))
        other = run_sdl(rescaled(game, rival, float(rng.uniform(0.1, 10.0))), Schedules(0.5),
                        game.uniform_start(), 1, seed=21)
        assert np.array_equal(other.final_point[game.slices[0]], base.final_point[game.slices[0]])
    print("[OK] Rescaling a rival leaves player 0's update bit-identical")


def test_information_isolation_separable_whole_run():
    game = separable_game(4, 2, seed=3)
    base = run_sdl(game, Schedules(1.5), game.uniform_start(), 300, seed=5, record_every=1)
    rng = np.random.default_rng(1)
    for _ in range(5):
        rival = int(rng.integers(1, 4))
        other = run_sdl(rescaled(game, rival, float(rng.uniform(0.1, 10.0))), Schedules(1.5),
                        game.uniform_start(), 300, seed=5, record_every=1)
        for (_, xa), (_, xb) in zip(base.iterates, other.iterates):
            assert np.array_equal(xa[game.slices[0]], xb[game.slices[0]])
    print("[OK] Player 0's whole trajectory is independent of rival rescaling")


def test_one_batched_draw_per_iteration():
    game = cournot_game(generate_cournot_instance(3, 2, 4))
    schedules = Schedules(0.5, 1, 1.0)
    with patch.object(GameInstance, "sample_costs_batch", autospec=True,
                      side_effect=GameInstance.sample_costs_batch) as spy:
        trace = run_sdl(game, schedules, game.uniform_start(), 20, seed=3)
    assert spy.call_count == 20
    for n, call in enumerate(spy.call_args_list, 1):
        _, points, _ = call.args
        _, ell_n, h_n = schedules_at(schedules, n)
        assert points.shape == (2 * ell_n, game.d)
        # rows alternate x + h Delta_j and x - h Delta_j around one centre x
        centres = 0.5 * (points[0::2] + points[1::2])
        assert np.allclose(centres, centres[0])
        assert np.allclose(np.abs(points[0::2] - points[1::2]), 2 * h_n)
    assert trace.cum_evals[-1] == 2 * sum(schedules_at(schedules, n)[1] for n in range(1, 21))
    print("[OK] Every iteration samples its 2 ell_n points in one call")


def test_player_step_sees_only_local_data():
    game = cournot_game(generate_cournot_instance(3, 2, 4))
    with patch.object(sdl, "_player_step", wraps=sdl._player_step) as spy:
        run_sdl(game, Schedules(0.5, 2, 0.0), game.uniform_start(), 3, seed=0)
    assert spy.call_count == 3 * game.num_players
    for call in spy.call_args_list:
        _, strategy_set, _, x_i, plus_i, minus_i, deltas_i, _, _ = call.args
        assert x_i.shape == (2,) and strategy_set.dimension == 2
        assert plus_i.shape == (2,) and minus_i.shape == (2,)
        assert deltas_i.shape == (2, 2)
    print("[OK] Player steps receive only their own slice")


def test_single_shot_baseline():
    game = cournot_game(generate_cournot_instance(3, 2, 6))
    trace = run_single_shot_baseline(game, Schedules(0.5), game.uniform_start(), 50, ref=np.zeros(game.d),
                                     seed=1, record_every=1)
    assert np.array_equal(trace.cum_evals, np.arange(1, 51))
    assert all(game.is_feasible(x) for _, x in trace.iterates)
    assert abs(trace.schedule_log[7][2] - 0.1 * 8 ** (-1.0 / 3.0)) < 1e-15
    print("[OK] Single-shot: one evaluation per step, feasible iterates")


def test_early_stop_on_radius_underflow():
    game = cournot_game(generate_cournot_instance(2, 2, 0))
    trace = run_sdl(game, Schedules(0.5, 1, 0.0, 2e-12), game.uniform_start(), 100, seed=0)
    # h_n = 2e-12 n^(-1/4) drops below 1e-12 after n = 16
    assert trace.iterations == 16
    print("[OK] Run stops once h_n underflows")


def test_bad_inputs():
    game = cournot_game(generate_cournot_instance(2, 2, 0))
    nan_game = GameInstance("nan", game.dims, game.sets, game.noisy_cost,
                            sample_game=lambda x, rng: np.array([np.nan, 1.0]))
    calls = [
        (ValueError, lambda: run_sdl(game, Schedules(0.5), np.full(game.d, 0.9), 5)),
        (ValueError, lambda: run_sdl(game, Schedules(0.5), game.uniform_start(), 0)),
        (ValueError, lambda: run_sdl(game, Schedules(0.5), np.ones(3), 5)),
        (NonFiniteObservation, lambda: run_sdl(nan_game, Schedules(0.5), game.uniform_start(), 5)),
    ]
    for error, call in calls:
        try:
            call()
        except error:
            continue
        raise AssertionError(f"expected {error.__name__}")
    print("[OK] Infeasible start, empty budget and NaN costs rejected")


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
