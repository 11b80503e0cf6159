import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from thermal_minmax import ais_estimator as ae
from thermal_minmax.ais_estimator import (
    AIS_CSV_FIELDS,
    AisConfig,
    DegenerateWeightsWarning,
    NearCoincidentFieldsWarning,
    SimplexState,
    ais_free_energy,
    estimate_to_row,
    geometric_schedule,
    log_simplex_volume,
    log_Zy_batch,
    log_Zy_divided_difference,
    log_Zy_exact,
    mh_pair_exchange_step,
    phi_of_x,
    sample_uniform_simplex,
)
from thermal_minmax.finite_temperature import ModelParams
from thermal_minmax.game_ensemble import GameInstance, sample_payoff

# log Z(C) of sample_payoff(3, 3, 7) at beta_max = 0.5, k = -1, sigma = 1 from
# nested Gauss-Legendre quadrature (tests/oracles.py, orders 48 and 96 agree)
LOG_Z_3X3_SEED7 = -0.29160058697691005

# log Z_y of the same matrix at beta_max = 0.5, sigma = 1 from 2-D quadrature
LOG_ZY_3X3_SEED7 = {
    (1.0, 1.0, 1.0): 1.7612167006979795,
    (0.2, 2.5, 0.3): 1.1732025953928946,
    (3.0, 0.0, 0.0): 3.0131985312736678,
}


# ---------------------------------------------------------------------------
# simplex volume and inner log-partition
# ---------------------------------------------------------------------------


def test_simplex_volume_examples():
    assert log_simplex_volume(2) == pytest.approx(math.log(2.0), abs=1e-15)
    assert log_simplex_volume(1) == 0.0
    assert log_simplex_volume(10_000) / 10_000 == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ValueError):
        log_simplex_volume(0)


def test_two_fields_closed_form():
    for b1, b2 in [(0.3, -1.2), (5.0, 4.0), (-20.0, 30.0), (1e-4, -1e-4)]:
        expected = math.log((math.exp(2 * b1) - math.exp(2 * b2)) / (b1 - b2))
        assert log_Zy_exact([b1, b2]) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("m", [1, 2, 3, 10, 80, 400])
def test_equal_fields_give_shifted_volume(m):
    b = 0.37
    assert log_Zy_exact(np.full(m, b)) == pytest.approx(log_simplex_volume(m) + m * b, rel=1e-12)
    assert log_Zy_exact(np.zeros(m)) == pytest.approx(log_simplex_volume(m), rel=1e-12, abs=1e-13)


def test_single_field_is_a_point_mass():
    assert log_Zy_exact([2.5]) == 2.5
    with pytest.raises(ValueError):
        log_Zy_exact([1.0, 2.0], m=3)
    with pytest.raises(ValueError):
        log_Zy_batch(np.array([[np.nan, 1.0]]))


def test_contour_matches_extended_precision_for_small_m():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(500):
        m = int(rng.integers(2, 13))
        scale = float(rng.choice([1e-3, 0.1, 1.0, 5.0, 20.0]))
        b = rng.normal(size=m) * scale
        ref = log_Zy_divided_difference(b)
        worst = max(worst, abs(log_Zy_exact(b) - ref) / max(1.0, abs(ref)))
    assert worst < 1e-9


def test_contour_matches_dense_quadrature_for_three_strategies():
    game = sample_payoff(3, 3, 7)
    kappa = math.sqrt(1.0 / 3.0)
    for x, ref in LOG_ZY_3X3_SEED7.items():
        b = 0.5 * kappa * (np.array(x) @ game.payoff)
        assert log_Zy_exact(b) == pytest.approx(ref, rel=1e-12)


def test_jit_and_numpy_paths_agree():
    rng = np.random.default_rng(5)
    for m in (2, 3, 7, 80, 200):
        b = rng.normal(size=(40, m)) * rng.choice([0.01, 1.0, 5.0])
        np.testing.assert_allclose(log_Zy_batch(b), log_Zy_batch(b, use_jit=False), rtol=1e-13, atol=1e-13)


def test_dominant_field_and_wide_spread():
    # one field far above the rest: Z ~ exp(M b_1) / prod (b_1 - b_k)
    b = np.array([50.0, 0.0, -3.0, 1.0, 2.0, -7.0])
    assert log_Zy_exact(b) == pytest.approx(log_Zy_divided_difference(b), rel=1e-12)
    b = np.concatenate([[0.0], np.linspace(-400.0, -300.0, 11)])
    assert log_Zy_exact(b) == pytest.approx(log_Zy_divided_difference(b), rel=1e-12)


def test_batch_shape_is_preserved():
    rng = np.random.default_rng(1)
    b = rng.normal(size=(2, 3, 5))
    out = log_Zy_batch(b)
    assert out.shape == (2, 3)
    assert out[1, 2] == pytest.approx(log_Zy_exact(b[1, 2]), rel=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-30, 30), min_size=2, max_size=40),
    st.floats(-1e3, 1e3),
)
def test_uniform_shift_adds_m_times_shift(fields, shift):
    b = np.array(fields)
    m = b.size
    assert log_Zy_exact(b + shift) == pytest.approx(log_Zy_exact(b) + m * shift, rel=1e-12, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-10, 10), min_size=2, max_size=30),
    st.integers(0, 29),
    st.floats(1e-3, 1.0),
)
def test_monotone_in_each_field(fields, which, bump):
    b = np.array(fields)
    j = which % b.size
    up = b.copy()
    up[j] += bump
    assert log_Zy_exact(up) >= log_Zy_exact(b) - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=30))
def test_permutation_invariance(fields):
    b = np.array(fields)
    assert log_Zy_exact(b[::-1]) == pytest.approx(log_Zy_exact(b), rel=1e-12, abs=1e-12)


def test_near_coincident_fields_are_split_with_warning():
    b = [0.5, 0.5, 0.5 + 1e-14, -1.0]
    with pytest.warns(NearCoincidentFieldsWarning):
        value = log_Zy_divided_difference(b)
    assert value == pytest.approx(log_Zy_exact(b), rel=1e-8)


def test_saddle_solves_its_equation():
    rng = np.random.default_rng(3)
    b = rng.normal(size=(20, 30)) * 4.0
    mu, d = ae._saddle(b)
    np.testing.assert_allclose((1.0 / d).sum(axis=1), 30.0, rtol=1e-13)
    assert np.all(mu[:, 0] > b.max(axis=1))


# ---------------------------------------------------------------------------
# chain state and kernel
# ---------------------------------------------------------------------------


def _params(sigma=1.0, beta_max=0.5, k=-1.0, gamma=1.0):
    return ModelParams.from_k(sigma, gamma, beta_max, k)


def test_phi_without_payoff_is_constant():
    game = sample_payoff(4, 6, 1)
    params = _params(sigma=0.0)
    rng = np.random.default_rng(0)
    for _ in range(5):
        state = SimplexState.from_x(sample_uniform_simplex(4, rng), game, params)
        assert state.cached_phi == pytest.approx(log_simplex_volume(6) / 0.5, rel=1e-13)


def test_phi_cache_follows_beta_max():
    game = sample_payoff(5, 7, 2)
    x = sample_uniform_simplex(5, np.random.default_rng(1))
    p1 = _params(beta_max=0.5)
    p2 = _params(beta_max=1.0)
    state = SimplexState.from_x(x, game, p1)
    first = state.cached_phi
    again = phi_of_x(state, game, p2)
    fresh = SimplexState.from_x(x, game, p2).cached_phi
    assert again == fresh == state.cached_phi
    assert again != first


def test_phi_matches_dense_quadrature():
    game = sample_payoff(3, 3, 7)
    params = _params(beta_max=0.5)
    for x, ref in LOG_ZY_3X3_SEED7.items():
        state = SimplexState.from_x(np.array(x), game, params)
        assert state.cached_phi * 0.5 == pytest.approx(ref, rel=1e-6)


def test_uniform_simplex_moments():
    rng = np.random.default_rng(11)
    draws = np.stack([sample_uniform_simplex(5, rng) for _ in range(100_000)])
    assert np.all(np.abs(draws.mean(axis=0) - 1.0) < 0.02)
    np.testing.assert_allclose(draws.sum(axis=1), 5.0, rtol=0, atol=1e-12)
    draws = np.stack([sample_uniform_simplex(50, rng) for _ in range(100_000)])
    assert abs(np.mean(draws[:, 0] ** 2) - 2 * 50 / 51) < 0.02
    assert np.all(draws >= 0)
    with pytest.raises(ValueError):
        sample_uniform_simplex(0, rng)


def test_uniform_simplex_is_exchangeable():
    rng = np.random.default_rng(12)
    draws = np.stack([sample_uniform_simplex(4, rng) for _ in range(40_000)])
    # each coordinate is 4 * Beta(1, 3); compare upper-quartile frequencies
    tail = 4.0 * (1.0 - 0.5 ** (1.0 / 3.0))
    freq = (draws > tail).mean(axis=0)
    np.testing.assert_allclose(freq, 0.5, atol=0.015)


def _batch(game, params, n_chains, seed):
    rngs = ae._chain_rngs(seed, 9, range(n_chains))
    kappa = params.kappa(game.n_rows, game.n_cols)
    return ae._start_block(rngs, game, kappa, params.beta_max), kappa


def test_zero_beta_accepts_every_in_domain_move():
    game = sample_payoff(6, 4, 3)
    params = _params()
    (x, a, phi), kappa = _batch(game, params, 200, 0)
    rng = np.random.default_rng(0)
    total_ok = total_in = 0
    for _ in range(200):
        ok, inside = ae._kernel_step(x, a, phi, game.payoff, kappa, 0.5, 0.0, 1.5, rng.random((200, 4)))
        assert np.array_equal(ok, inside)
        total_ok += ok.sum()
        total_in += inside.sum()
    assert 0 < total_ok < 200 * 200


def test_sum_is_preserved_and_cache_stays_consistent():
    game = sample_payoff(8, 20, 4)
    params = _params(beta_max=1.0, k=-0.8)
    (x, a, phi), kappa = _batch(game, params, 100, 1)
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        ae._kernel_step(x, a, phi, game.payoff, kappa, 1.0, 0.8, 1.0, rng.random((100, 4)))
    np.testing.assert_allclose(x.sum(axis=1), 8.0, rtol=0, atol=1e-12)
    assert np.all(x >= 0)
    np.testing.assert_allclose(a, kappa * (x @ game.payoff), rtol=0, atol=1e-9)
    np.testing.assert_allclose(phi, log_Zy_batch(a) / 1.0, rtol=0, atol=1e-9)


def test_single_chain_step_agrees_with_batch_kernel():
    game = sample_payoff(5, 6, 8)
    params = _params()
    state = SimplexState.from_x(sample_uniform_simplex(5, np.random.default_rng(0)), game, params)
    rng = np.random.default_rng(42)
    moved = 0
    for _ in range(200):
        state, ok = mh_pair_exchange_step(state, game, params, 0.5, 0.8, rng)
        moved += ok
    assert 0 < moved < 200
    assert state.x.sum() == pytest.approx(5.0, abs=1e-12)
    fresh = SimplexState.from_x(state.x, game, params)
    assert state.cached_phi == pytest.approx(fresh.cached_phi, abs=1e-10)
    with pytest.raises(ValueError):
        mh_pair_exchange_step(state, game, params, -1.0, 0.8, rng)


def test_stationary_law_on_two_strategy_simplex():
    """Two rows: x = (t, 2 - t) and the target density is exp(-beta phi(t)) on [0, 2]."""
    c = np.array([[1.5, -0.5, 0.2], [-1.0, 0.8, -0.3]])
    game = GameInstance(c, 2, 3, -1)
    params = ModelParams(sigma=4.0, gamma=2 / 3, beta_max=1.0, beta_min=1.0)
    beta_t = 3.0
    kappa = params.kappa(2, 3)

    def density(t):
        b = kappa * (np.array([t, 2.0 - t]) @ c)
        return math.exp(-beta_t * log_Zy_exact(b))

    edges = np.linspace(0.0, 2.0, 11)
    mass = np.array([quad(density, lo, hi, epsabs=0, epsrel=1e-12)[0] for lo, hi in zip(edges[:-1], edges[1:])])
    prob = mass / mass.sum()
    assert prob.max() / prob.min() > 3.0  # the target is far from uniform

    n_chains = 20_000
    (x, a, phi), _ = _batch(game, params, n_chains, 5)
    rng = np.random.default_rng(7)
    for _ in range(150):
        ae._kernel_step(x, a, phi, c, kappa, 1.0, beta_t, 0.9, rng.random((n_chains, 4)))
    counts = np.histogram(x[:, 0], bins=edges)[0]
    se = np.sqrt(n_chains * prob * (1 - prob))
    z = (counts - n_chains * prob) / se
    assert np.all(np.abs(z) < 3.0), z


# ---------------------------------------------------------------------------
# annealing
# ---------------------------------------------------------------------------


def test_geometric_schedule_endpoints():
    grid = geometric_schedule(0.7, 50)
    assert grid[0] == 0.0 and grid[-1] == 0.7
    assert grid.size == 51
    assert np.all(np.diff(grid) > 0)
    np.testing.assert_allclose(grid[2:] / grid[1:-1], grid[2] / grid[1], rtol=1e-12)
    assert geometric_schedule(0.7, 1).tolist() == [0.0, 0.7]


def test_config_validation():
    with pytest.raises(ValueError):
        AisConfig(n_chains=0)
    with pytest.raises(ValueError):
        AisConfig(step_half_width=0.0)
    with pytest.raises(ValueError):
        AisConfig(schedule=(0.1, 0.5))
    with pytest.raises(ValueError):
        AisConfig(schedule=(0.0, 0.5, 0.4))
    with pytest.raises(ValueError):
        AisConfig(schedule=(0.0, 0.2, 0.4)).grid(0.5)


def test_zero_payoff_scale_is_exact():
    for n, m, k in [(3, 3, -1.0), (7, 4, -0.75), (5, 9, -1.3)]:
        game = sample_payoff(n, m, 0)
        params = _params(sigma=0.0, beta_max=0.5, k=k)
        est = ais_free_energy(game, params, AisConfig(n_chains=20, n_temperatures=10, seed=3))
        exact = -(log_simplex_volume(n) + k * log_simplex_volume(m)) / params.beta_min
        assert est.F_hat == pytest.approx(exact, rel=1e-14, abs=1e-14)
        assert np.ptp(est.log_weights) == 0.0
        assert est.stderr == 0.0
        assert est.ess == pytest.approx(20.0)


@pytest.fixture(scope="module")
def small_run():
    game = sample_payoff(3, 3, 7)
    params = _params(beta_max=0.5, k=-1.0)
    cfg = AisConfig(n_chains=1000, n_temperatures=100, seed=1)
    return game, params, cfg, ais_free_energy(game, params, cfg)


def test_small_instance_matches_nested_quadrature(small_run):
    _, params, _, est = small_run
    exact = -LOG_Z_3X3_SEED7 / params.beta_min
    assert abs(est.F_hat - exact) < 3 * est.stderr
    assert est.stderr < 0.02


def test_estimate_invariants(small_run):
    game, params, cfg, est = small_run
    assert 0 < est.ess <= cfg.n_chains
    assert 0 <= est.acceptance_rate <= est.in_domain_acceptance_rate <= 1
    assert est.F_hat == pytest.approx(-est.log_Z_hat / params.beta_min, rel=1e-15)
    assert est.norm_v_hat == pytest.approx(est.F_hat / 3.0, rel=1e-15)
    assert est.log_weights.shape == (cfg.n_chains,)
    assert est.schedule[0] == 0.0 and est.schedule[-1] == params.beta_min
    lw = est.log_weights
    assert est.log_Z_hat == pytest.approx(log_simplex_volume(3) + np.log(np.mean(np.exp(lw))), rel=1e-12)


def test_run_is_reproducible_and_independent_of_blocking(small_run):
    game, params, cfg, est = small_run
    again = ais_free_energy(game, params, cfg)
    np.testing.assert_array_equal(again.log_weights, est.log_weights)
    blocked = ais_free_energy(
        game, params, AisConfig(n_chains=cfg.n_chains, n_temperatures=cfg.n_temperatures, seed=cfg.seed, chain_block=128)
    )
    np.testing.assert_array_equal(blocked.log_weights, est.log_weights)
    other = ais_free_energy(
        game, params, AisConfig(n_chains=cfg.n_chains, n_temperatures=cfg.n_temperatures, seed=cfg.seed + 1)
    )
    assert other.F_hat != est.F_hat


def test_first_chains_do_not_depend_on_chain_count(small_run):
    game, params, cfg, est = small_run
    fewer = ais_free_energy(
        game, params,
        AisConfig(n_chains=100, n_temperatures=cfg.n_temperatures, seed=cfg.seed, step_half_width=est.step_half_width),
    )
    same_h = ais_free_energy(
        game, params,
        AisConfig(n_chains=cfg.n_chains, n_temperatures=cfg.n_temperatures, seed=cfg.seed, step_half_width=est.step_half_width),
    )
    np.testing.assert_array_equal(fewer.log_weights, same_h.log_weights[:100])


def test_doubling_temperatures_is_consistent():
    game = sample_payoff(5, 4, 2)
    params = _params(beta_max=0.8, k=-1.1, gamma=1.25)
    a = ais_free_energy(game, params, AisConfig(n_chains=600, n_temperatures=60, seed=4))
    b = ais_free_energy(game, params, AisConfig(n_chains=600, n_temperatures=120, seed=5))
    assert abs(a.F_hat - b.F_hat) < 3 * math.hypot(a.stderr, b.stderr)


def test_pilot_tuning_reaches_target_band():
    game = sample_payoff(10, 10, 3)
    params = _params(beta_max=0.5)
    h, rate = ae.tune_step_half_width(game, params, seed=0)
    assert 0.3 <= rate <= 0.5
    assert 0 < h <= 10


def test_degenerate_weights_warn():
    game = sample_payoff(12, 12, 0)
    params = ModelParams(sigma=1.0, gamma=1.0, beta_max=3.0, beta_min=6.0)
    with pytest.warns(DegenerateWeightsWarning):
        ais_free_energy(game, params, AisConfig(n_chains=200, n_temperatures=1, mcmc_steps_per_temp=1, seed=0))


def test_first_increment_uses_uniform_start():
    game = sample_payoff(4, 5, 6)
    params = _params(beta_max=0.7, k=-0.9, gamma=0.8)
    cfg = AisConfig(n_chains=50, n_temperatures=1, seed=2, step_half_width=0.5)
    est = ais_free_energy(game, params, cfg)
    rngs = ae._chain_rngs(2, 0, range(50))
    x = np.stack([sample_uniform_simplex(4, r) for r in rngs])
    phi = log_Zy_batch(params.beta_max * params.kappa(4, 5) * (x @ game.payoff)) / params.beta_max
    np.testing.assert_allclose(est.log_weights, -params.beta_min * phi, rtol=1e-14)


def test_csv_row_schema(small_run):
    game, params, cfg, est = small_run
    row = estimate_to_row(est, params, game.seed)
    assert tuple(row) == AIS_CSV_FIELDS
    assert row["n_temps"] == cfg.n_temperatures
    assert row["k"] == pytest.approx(-1.0)
