import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _support import random_admissible_agent
from conftest import UNIT, cubic_agents
from raid.agents import (
    AgentSpec,
    InadmissibleAgentError,
    NoiseSpec,
    agent_cost,
    best_response,
    desired_incentive,
    draw_noise,
    interior_margin,
    noise_series,
    observe,
)
from raid.polybasis import CurvatureBounds, StrategyInterval, basis_gradient

seeds = st.integers(0, 2**32 - 1)


@pytest.mark.parametrize(
    "index, p, x, interior",
    [(0, -1.5, 0.5, True), (1, -4.25, 0.5, True), (0, -3.0, 1.0, False)],
)
def test_best_response_examples(index, p, x, interior):
    r = best_response(cubic_agents()[index], p)
    assert r.x == pytest.approx(x, abs=1e-10)
    assert r.interior is interior


def test_boundary_responses_are_exact_endpoints(agent1):
    assert best_response(agent1, 10.0).x == -1.0
    assert best_response(agent1, -10.0).x == 1.0
    assert not best_response(agent1, 10.0).interior


def test_first_order_condition_residual(agents):
    for agent in agents:
        for p in np.linspace(-5, 5, 41):
            r = best_response(agent, p)
            if r.interior:
                assert abs(agent.theta @ basis_gradient(r.x, agent.d) + p) <= 1e-10


def test_response_within_margin_is_not_interior():
    agent = cubic_agents()[0]  # x* = -1 - p, so p picks the response directly
    eta = interior_margin(agent.X)
    assert eta == pytest.approx(2e-9)
    assert not best_response(agent, -2.0 + eta / 4).interior
    assert best_response(agent, -2.0 + 10 * eta).interior


def test_inadmissible_agent_rejected():
    with pytest.raises(InadmissibleAgentError):
        AgentSpec((0.0, 0.0, 1.0), UNIT, CurvatureBounds(0.1, 10.0))
    with pytest.raises(InadmissibleAgentError):
        AgentSpec((1.0,), UNIT, CurvatureBounds(0.1, 10.0))


@pytest.mark.parametrize(
    "theta, x, expected",
    [((1.0, 0.5, 0.0), 0.5, -1.5), ((0.0, 3.5, 1.0), 0.5, -4.25), ((0.0, 0.0, 0.0), 0.3, 0.0)],
)
def test_desired_incentive_examples(theta, x, expected):
    assert desired_incentive(np.array(theta), x) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=150)
@given(seeds, st.floats(0.0, 1.0))
def test_round_trip_through_desired_incentive(seed, u):
    agent = random_admissible_agent(np.random.default_rng(seed))
    eta = interior_margin(agent.X)
    x_des = agent.X.lo + 2 * eta + u * (agent.X.width - 4 * eta)
    r = best_response(agent, desired_incentive(agent.theta, x_des))
    assert abs(r.x - x_des) <= 1e-8
    assert r.interior


@settings(max_examples=100)
@given(seeds, st.floats(-20, 20), st.floats(-20, 20))
def test_best_response_monotone(seed, p1, p2):
    agent = random_admissible_agent(np.random.default_rng(seed))
    lo, hi = min(p1, p2), max(p1, p2)
    assert best_response(agent, lo).x >= best_response(agent, hi).x


@settings(max_examples=100)
@given(seeds, st.floats(0.05, 0.95))
def test_best_response_slope_bounds(seed, u):
    agent = random_admissible_agent(np.random.default_rng(seed))
    x0 = agent.X.lo + u * agent.X.width
    p = desired_incentive(agent.theta, x0)
    h = 1e-5
    slope = (best_response(agent, p + h).x - best_response(agent, p - h).x) / (2 * h)
    m, M = agent.bounds.m, agent.bounds.M
    assert -1 / m - 1e-3 <= slope <= -1 / M + 1e-3


@settings(max_examples=50)
@given(seeds, st.floats(-10, 10))
def test_best_response_is_optimal(seed, p):
    rng = np.random.default_rng(seed)
    agent = random_admissible_agent(rng)
    best = agent_cost(agent, best_response(agent, p).x, p)
    for x in rng.uniform(agent.X.lo, agent.X.hi, 100):
        assert best <= agent_cost(agent, x, p) + 1e-12


@pytest.mark.parametrize("p, e, expected", [(-1.5, 0.2, -1.3), (-1.5, 0.0, -1.5), (0.0, -0.1, -0.1)])
def test_observe_examples(p, e, expected):
    assert observe(p, e) == pytest.approx(expected, abs=1e-15)


def test_noise_none_is_zero():
    rng = np.random.default_rng(3)
    assert all(draw_noise(NoiseSpec("none", 0.0), rng) == 0.0 for _ in range(10))


def test_rademacher_values():
    rng = np.random.default_rng(4)
    draws = {draw_noise(NoiseSpec("rademacher", 0.1), rng) for _ in range(200)}
    assert draws == {-0.1, 0.1}


def test_uniform_support():
    draws = noise_series(NoiseSpec("uniform", 0.5), np.random.default_rng(5), 10_000)
    assert draws.min() >= -0.5 and draws.max() <= 0.5
    assert draws.min() < -0.49 and draws.max() > 0.49


def test_gaussian_mean_and_variance():
    draws = noise_series(NoiseSpec("gaussian", 0.1), np.random.default_rng(6), 1_000_000)
    assert abs(draws.mean()) <= 0.002
    assert draws.var() == pytest.approx(0.1, rel=0.01)


@pytest.mark.parametrize("kind, scale", [("gaussian", 0.1), ("uniform", 0.5), ("rademacher", 0.1), ("none", 0.0)])
def test_noise_series_matches_scalar_draws(kind, scale):
    spec = NoiseSpec(kind, scale)
    a, b = np.random.default_rng(11), np.random.default_rng(11)
    series = noise_series(spec, a, 50)
    scalars = np.array([draw_noise(spec, b) for _ in range(50)])
    assert series.tobytes() == scalars.tobytes()


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec("gaussian", 0.0)
    with pytest.raises(ValueError):
        NoiseSpec("laplace", 1.0)


def test_nonfinite_incentive_rejected(agent1):
    with pytest.raises(ValueError):
        best_response(agent1, math.nan)


def test_wide_interval_quadratic_agent():
    agent = AgentSpec((2.0, 1.0), StrategyInterval(-10.0, 10.0), CurvatureBounds(2.0, 2.0))
    # cost 2x + x^2 + p x has minimiser -(2 + p)/2
    assert best_response(agent, 1.0).x == pytest.approx(-1.5, abs=1e-11)
