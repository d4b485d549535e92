import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _support import random_admissible_agent
from conftest import cubic_agents
from raid.agents import AgentSpec, NoiseSpec
from raid.experiments import (
    RegretAccumulator,
    SeedResult,
    aggregate,
    empirical_excitation,
    excitation_margin,
    exploration_ratio,
    fit_rate,
    information_ratio,
    log_grid,
    probing_information_growth,
    regret_update,
    run_monte_carlo,
    run_seed,
)
from raid.polybasis import CurvatureBounds, StrategyInterval, basis_gradient
from raid.policy import simulate_agent

QUAD = AgentSpec((2.0, 1.0), StrategyInterval(-10.0, 10.0), CurvatureBounds(2.0, 2.0))


def test_regret_examples():
    acc = regret_update(RegretAccumulator(), [0.5, 0.5, 0.5], [0.5, 0.5, 0.5])
    assert acc.per_step == [0.0] and acc.cumulative == 0.0
    acc = regret_update(RegretAccumulator(), [1.0, 0.0, 0.5], [0.5, 0.5, 0.5])
    assert acc.per_step == [0.5] and acc.cumulative == 0.5
    with pytest.raises(ValueError):
        regret_update(acc, [1.0], [0.5, 0.5])


@given(st.lists(st.lists(st.floats(-2, 2), min_size=2, max_size=2), min_size=1, max_size=30))
def test_regret_cumulative_is_sum(xs):
    acc = RegretAccumulator()
    prev = 0.0
    for x in xs:
        regret_update(acc, x, [0.0, 0.1])
        assert acc.cumulative >= prev
        prev = acc.cumulative
    assert acc.cumulative == pytest.approx(sum(acc.per_step), rel=1e-12)


@given(st.integers(1, 10**6), st.integers(2, 200))
def test_log_grid(T, points):
    g = log_grid(T, points)
    assert g[0] == 1 and g[-1] == T
    assert np.all(np.diff(g) > 0) and len(g) <= points


def _synthetic(seed, values):
    grid = np.array([1, 10, 100])
    arr = np.array(values, dtype=float)
    return SeedResult(seed, grid, arr, arr * grid, np.zeros_like(arr), np.ones_like(arr), np.ones_like(arr))


def test_aggregation_reproduces_known_moments():
    a = _synthetic(0, [[1.0, 2.0, 4.0]])
    b = _synthetic(1, [[3.0, 2.0, 0.0]])
    agg = aggregate([a, b])
    i = agg.row(0)
    np.testing.assert_array_equal(agg.mean_theta_err[i], [2.0, 2.0, 2.0])
    np.testing.assert_array_equal(agg.std_theta_err[i], [1.0, 0.0, 2.0])
    np.testing.assert_array_equal(agg.mean_avg_regret[i], [2.0, 2.0, 2.0])
    assert agg.labels == ["0", "all"] and agg.n_runs == 2


def test_single_seed_has_zero_spread():
    agg = aggregate([_synthetic(0, [[1.0, 2.0, 4.0], [0.5, 0.25, 0.125]])])
    assert not agg.std_theta_err.any() and not agg.std_avg_regret.any()
    np.testing.assert_allclose(agg.mean_theta_err[agg.row("all")], np.hypot([1.0, 2.0, 4.0], [0.5, 0.25, 0.125]))


def test_aggregation_rejects_mismatched_grids():
    a = _synthetic(0, [[1.0, 2.0, 4.0]])
    b = SeedResult(1, np.array([1, 10, 50]), a.theta_err, a.regret, a.exploration_count, a.lambda_min_info,
                   a.tr_sigma)
    with pytest.raises(ValueError):
        aggregate([a, b])
    with pytest.raises(ValueError):
        aggregate([])


@pytest.fixture(scope="module")
def small(scenario):
    return scenario.replace(horizon=2000, seed_count=6)


def test_seed_permutation_leaves_aggregate(small):
    seeds = small.run_seeds()
    a = run_monte_carlo(small, seeds).aggregate
    b = run_monte_carlo(small, seeds[::-1]).aggregate
    for name in ("mean_theta_err", "std_theta_err", "mean_avg_regret", "std_avg_regret"):
        np.testing.assert_allclose(getattr(a, name), getattr(b, name), rtol=1e-12, atol=0)


def test_parallel_matches_serial(small):
    a = run_monte_carlo(small, jobs=1).aggregate
    b = run_monte_carlo(small, jobs=2).aggregate
    assert a.mean_theta_err.tobytes() == b.mean_theta_err.tobytes()
    assert a.std_avg_regret.tobytes() == b.std_avg_regret.tobytes()


def test_regret_recomputable_from_records(small):
    seed = small.run_seeds()[0]
    res = run_seed(small, seed)
    for i, agent in enumerate(small.agents):
        tr = simulate_agent(agent, 0.5, small.schedule, small.horizon, seed, i)
        np.testing.assert_allclose(res.regret[i], np.cumsum(tr.sq_track_err)[res.grid - 1], rtol=1e-10)


def test_exact_tracking_prefix_has_no_regret(scenario):
    quiet = tuple(AgentSpec(a.theta_star, a.X, a.bounds) for a in scenario.agents)
    sc = scenario.replace(agents=quiet, horizon=100, rho=1e-6, theta0=tuple(a.theta_star for a in quiet))
    res = run_seed(sc, 1)
    assert res.exploration_count[:, -1].sum() == 0
    assert res.avg_regret().max() <= 1e-12


def test_fit_exact_power_law():
    t = log_grid(100_000).astype(float)
    fit = fit_rate(t, t ** (-1 / 3), (1e2, 1e5))
    assert fit.slope == pytest.approx(-1 / 3, abs=1e-9)
    assert fit.r_squared >= 1 - 1e-12


def test_fit_power_law_with_log_factor():
    t = log_grid(100_000).astype(float)
    fit = fit_rate(t, t ** (-1 / 3) * np.log(t), (1e3, 1e5))
    assert -0.33 < fit.slope < -0.12


def test_fit_constant_series():
    t = log_grid(100_000).astype(float)
    assert fit_rate(t, np.full_like(t, 3.0), (1e2, 1e5)).slope == pytest.approx(0.0, abs=1e-9)


def test_fit_rejects_bad_input():
    t = log_grid(100_000).astype(float)
    with pytest.raises(ValueError):
        fit_rate(t, np.where(t > 1e4, 0.0, 1.0), (1e2, 1e5))
    with pytest.raises(ValueError):
        fit_rate(t, np.ones_like(t), (1e4, 1.1e4))
    with pytest.raises(ValueError):
        fit_rate(t, np.ones_like(t), (1e5, 1e2))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 50.0))
def test_excitation_symmetric_psd(seed, sigma2):
    agent = random_admissible_agent(np.random.default_rng(seed))
    m = empirical_excitation(agent, sigma2, 500, seed)
    assert np.array_equal(m, m.T)
    assert np.linalg.eigvalsh(m)[0] >= -1e-10


def test_single_sample_excitation_is_rank_one():
    agent = AgentSpec((0.0, 0.5), StrategyInterval(-10.0, 10.0), CurvatureBounds(1.0, 1.0))
    m = empirical_excitation(agent, 2.0, 1, 3)
    eig = np.linalg.eigvalsh(m)
    assert abs(eig[0]) <= 1e-12 * eig[-1]
    assert eig[-1] >= 1.0  # the leading regressor entry is one


def test_narrow_interval_has_no_excitation():
    agent = AgentSpec((0.0, 0.5), StrategyInterval(0.5, 0.5 + 1e-6), CurvatureBounds(1.0, 1.0))
    assert np.abs(empirical_excitation(agent, 1e6, 10_000, 1)).max() <= 1e-6


def test_excitation_margin_positive(agents):
    for agent in agents:
        est = excitation_margin(agent, 2.0, 100_000, 11)
        assert est.lambda_min > 5 * est.std_error
        assert est.z_score > 5


def test_growth_matches_direct_information_sum():
    T = 100
    t, ratio = probing_information_growth(QUAD, 2.0, T, 21, grid=np.arange(1, T + 1))
    traj = simulate_agent(QUAD, 0.0, None, T, 21, force_explore=True, probe_sigma2=2.0)
    info = np.eye(2) / 10.0
    for s in range(T):
        if traj.interior[s]:
            xi = basis_gradient(traj.x[s], 2)
            info = info + np.outer(xi, xi)
        assert ratio[s] == pytest.approx(np.linalg.eigvalsh(info)[0] / (s + 1), rel=1e-8)
    assert ratio[-1] > 0


def test_growth_collapses_without_probing_variance():
    T = 1000
    t, ratio = probing_information_growth(QUAD, 1e-12, T, 21)
    # every response sits at the same point, so only the prior spans the second direction
    assert ratio[-1] * T == pytest.approx(0.1, rel=1e-3)


def test_growth_stabilises_for_builtin_agent():
    agent = cubic_agents()[1]
    grid = np.array([10_000, 100_000])
    t, ratio = probing_information_growth(agent, 2.0, 100_000, 5, grid=grid)
    assert abs(ratio[1] - ratio[0]) <= 0.2 * ratio[0]


def test_growth_requires_horizon():
    with pytest.raises(ValueError):
        probing_information_growth(QUAD, 2.0, 50, 1)


def test_ratios_undefined_at_first_step(small):
    res = run_seed(small, 3)
    assert np.isnan(exploration_ratio(res, 2 / 3)[:, 0]).all()
    assert np.isfinite(information_ratio(res, 2 / 3)[:, 1:]).all()
