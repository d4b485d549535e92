"""Self-checks run by ``raid verify``: estimator oracle, excitation and pure-probing growth."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .estimator import Regressor, batch_ls_oracle, initial_state, rls_update
from .experiments import excitation_margin, log_grid, probing_information_growth
from .polybasis import basis_gradient
from .policy import simulate_agent
from .scenario import Scenario

CHECKS = ("oracle", "excitation", "growth")

ORACLE_RTOL = 1e-8
EXCITATION_Z = 5.0
GROWTH_BAND = 0.2


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_trajectory(rng: np.random.Generator, d: int, length: int) -> list[Regressor]:
    """Regressors from random actions in [-1, 1] with about a quarter of the gates closed."""
    xs = rng.uniform(-1.0, 1.0, length)
    p_hat = rng.normal(0.0, 2.0, length)
    gates = rng.random(length) < 0.75
    return [Regressor(basis_gradient(x, d), p, g) for x, p, g in zip(xs, p_hat, gates)]


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(b)), 1e-300)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b))) / scale


def oracle_discrepancy(traj: list[Regressor], rho: float = 10.0) -> tuple[float, float]:
    """(final estimate error vs. batch solution, worst per-step rank-one identity error)."""
    d = traj[0].xi.size
    state = initial_state(d, rho)
    worst = 0.0
    for r in traj:
        nxt = rls_update(state, r)
        expected = np.linalg.inv(state.sigma) + (np.outer(r.xi, r.xi) if r.delta else 0.0)
        worst = max(worst, relative_error(np.linalg.inv(nxt.sigma), expected))
        state = nxt
    batch = batch_ls_oracle(traj, np.zeros(d), rho * np.eye(d))
    return relative_error(state.theta_hat, batch), worst


def check_oracle(scenario: Scenario, trials: int = 50, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    final_worst = step_worst = 0.0
    for k in range(trials):
        d = 1 + k % 3
        traj = random_trajectory(rng, d, int(rng.integers(1, 501)))
        fe, se = oracle_discrepancy(traj, scenario.rho)
        final_worst = max(final_worst, fe)
        step_worst = max(step_worst, se)
    out = [
        CheckResult(
            "oracle/random-trajectories",
            final_worst <= ORACLE_RTOL and step_worst <= ORACLE_RTOL,
            f"{trials} trajectories: final rel err {final_worst:.2e}, rank-one rel err {step_worst:.2e}",
        )
    ]

    # The policy must feed the estimator exactly its gated probing samples.
    T = min(scenario.horizon, 500)
    seed0 = scenario.run_seeds()[0]
    for i, agent in enumerate(scenario.agents):
        if T == 0:
            break
        traj = simulate_agent(
            agent, scenario.x_des[i], scenario.schedule, T, seed0, i,
            rho=scenario.rho, theta0=scenario.theta0_for(i),
        )
        samples = [
            Regressor(basis_gradient(traj.x[s], agent.d), traj.p_hat[s], bool(traj.interior[s]))
            for s in range(T)
            if traj.explore[s]
        ]
        theta0 = scenario.theta0_for(i) or np.zeros(agent.d)
        batch = batch_ls_oracle(samples, theta0, scenario.rho * np.eye(agent.d))
        err = relative_error(traj.final.estimator.theta_hat, batch)
        out.append(
            CheckResult(f"oracle/policy-agent-{i}", err <= ORACLE_RTOL, f"{T} steps, rel err {err:.2e}")
        )
    return out


def check_excitation(scenario: Scenario, samples: int, sigma2: float, seed: int) -> list[CheckResult]:
    out = []
    for i, agent in enumerate(scenario.agents):
        est = excitation_margin(agent, sigma2, samples, seed)
        floor = 1e-12 * max(float(np.abs(est.matrix).max()), 1.0)
        ok = est.lambda_min > floor and est.lambda_min > EXCITATION_Z * est.std_error
        out.append(
            CheckResult(
                f"excitation/agent-{i}",
                ok,
                f"lambda_min {est.lambda_min:.4g} +- {est.std_error:.2g} (z = {est.z_score:.1f}, N = {samples})",
            )
        )
    return out


def check_growth(scenario: Scenario, horizon: int, sigma2: float, seed: int) -> list[CheckResult]:
    early = horizon // 10
    grid = np.union1d(log_grid(horizon), [early, horizon])
    out = []
    for i, agent in enumerate(scenario.agents):
        t, ratio = probing_information_growth(agent, sigma2, horizon, seed, rho=scenario.rho, grid=grid)
        r_early = float(ratio[t == early][0])
        r_late = float(ratio[t == horizon][0])
        ok = r_early > 0 and abs(r_late - r_early) <= GROWTH_BAND * r_early
        out.append(
            CheckResult(
                f"growth/agent-{i}",
                ok,
                f"lambda/t at t={early}: {r_early:.4g}, at t={horizon}: {r_late:.4g} "
                f"(change {100 * (r_late / r_early - 1) if r_early > 0 else math.inf:+.1f}%)",
            )
        )
    return out


def run_checks(
    scenario: Scenario,
    which: str = "all",
    *,
    samples: int = 1_000_000,
    horizon: int = 100_000,
    sigma2: float | None = None,
    seed: int | None = None,
) -> list[CheckResult]:
    """Run the named check family (or ``"all"``) and return one result per item."""
    if which != "all" and which not in CHECKS:
        raise ValueError(f"unknown check {which!r}; expected 'all' or one of {CHECKS}")
    sigma2 = scenario.schedule.sigma2 if sigma2 is None else sigma2
    seed = scenario.run_seeds()[0] if seed is None else seed
    runners: dict[str, Callable[[], list[CheckResult]]] = {
        "oracle": lambda: check_oracle(scenario),
        "excitation": lambda: check_excitation(scenario, samples, sigma2, seed),
        "growth": lambda: check_growth(scenario, horizon, sigma2, seed),
    }
    names = CHECKS if which == "all" else (which,)
    results: list[CheckResult] = []
    for name in names:
        results.extend(runners[name]())
    return results
