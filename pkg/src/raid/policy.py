"""Switching incentive policy: Gaussian probing versus certainty-equivalence incentives.

At step ``t`` the planner probes agent ``i`` when ``tr(Sigma_i(t-1)) > 1/A(t-1)``
with ``A(t) = t**gamma * ln t`` and otherwise posts the incentive that would
elicit ``x_des`` if the current estimate were the true type. Probing steps
feed the estimator; exploitation steps freeze it.

``A(0)`` and ``A(1)`` are taken as 0, which makes the threshold infinite, so
the first two steps always exploit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

import numpy as np
from numba import njit

from .agents import AgentSpec, _best_response, _is_interior, draw_noise, noise_series
from .estimator import (
    DEFAULT_RHO,
    EstimatorFault,
    EstimatorState,
    _min_eig_info,
    _rls_update_inplace,
    _trace,
    initial_state,
)
from .polybasis import _directional_gradient, _gradient_into
from .seeding import AgentStreams, agent_streams

__all__ = [
    "Phase",
    "ScheduleParams",
    "PlannerState",
    "StepRecord",
    "AgentTrajectory",
    "threshold",
    "switch_decision",
    "initial_planner",
    "raid_step",
    "simulate_agent",
    "run_horizon",
]

GAMMA_MIN = 2.0 / 3.0


class Phase(str, Enum):
    EXPLORE = "explore"
    EXPLOIT = "exploit"


@dataclass(frozen=True)
class ScheduleParams:
    gamma: float = GAMMA_MIN
    sigma2: float = 2.0

    def __post_init__(self) -> None:
        # 2/3 written as a decimal loses the last bit; accept anything within rounding.
        if not (GAMMA_MIN - 1e-12 <= self.gamma < 1.0):
            raise ValueError(f"gamma must lie in [2/3, 1), got {self.gamma}")
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValueError(f"probing variance must be positive, got {self.sigma2}")

    @property
    def probe_std(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass(frozen=True, eq=False)
class PlannerState:
    """Planner-side state for one agent after ``t`` steps."""

    estimator: EstimatorState
    phase: Phase | None = None
    exploration_count: int = 0
    t: int = 0


@dataclass(frozen=True, eq=False)
class StepRecord:
    t: int
    agent: int
    phase: Phase
    p: float
    p_hat: float
    x: float
    interior: bool
    theta_hat: np.ndarray
    tr_sigma: float
    lambda_min_info: float
    sq_track_err: float


@njit(cache=True)
def _threshold(t, gamma):
    if t < 2:
        return 0.0
    tf = float(t)
    return tf**gamma * math.log(tf)


@njit(cache=True)
def _explores(tr_sigma, t, gamma):
    a = _threshold(t - 1, gamma)
    if a <= 0.0:
        return False
    return tr_sigma > 1.0 / a


@njit(cache=True)
def _advance(theta_star, lo, hi, x_des, theta, sigma, xi, explore, probe, noise):
    if explore:
        p = probe
    else:
        p = -_directional_gradient(theta, x_des)
    x = _best_response(theta_star, lo, hi, p)
    interior = _is_interior(x, lo, hi)
    p_hat = p + noise
    ok = True
    updated = False
    if explore and interior:
        _gradient_into(x, xi)
        ok = _rls_update_inplace(theta, sigma, xi, p_hat)
        updated = True
    return p, p_hat, x, interior, ok, updated


@njit(cache=True)
def _run_agent(theta_star, lo, hi, x_des, gamma, probes, noises, theta, sigma, T, force_explore, full, grid):
    d = theta.size
    xi = np.empty(d)
    G = grid.size
    g_err = np.empty(G)
    g_regret = np.empty(G)
    g_count = np.empty(G, dtype=np.int64)
    g_lam = np.empty(G)
    g_tr = np.empty(G)
    nf = T if full else 0
    f_explore = np.zeros(nf, dtype=np.bool_)
    f_p = np.empty(nf)
    f_phat = np.empty(nf)
    f_x = np.empty(nf)
    f_int = np.zeros(nf, dtype=np.bool_)
    f_tr = np.empty(nf)
    f_lam = np.empty(nf)
    f_sq = np.empty(nf)
    f_theta = np.empty((nf, d))

    count = 0
    updates = 0
    regret = 0.0
    gi = 0
    fault = 0
    last_explore = False
    for tau in range(1, T + 1):
        explore = force_explore or _explores(_trace(sigma), tau, gamma)
        probe = 0.0
        last_explore = explore
        if explore:
            probe = probes[count]
            count += 1
        p, p_hat, x, interior, ok, updated = _advance(
            theta_star, lo, hi, x_des, theta, sigma, xi, explore, probe, noises[tau - 1]
        )
        if not ok:
            fault = tau
            break
        if updated:
            updates += 1
        dx = x - x_des
        sq = dx * dx
        regret += sq
        if full:
            i = tau - 1
            f_explore[i] = explore
            f_p[i] = p
            f_phat[i] = p_hat
            f_x[i] = x
            f_int[i] = interior
            f_tr[i] = _trace(sigma)
            f_lam[i] = _min_eig_info(sigma)
            f_sq[i] = sq
            for k in range(d):
                f_theta[i, k] = theta[k]
        if gi < G and grid[gi] == tau:
            err = 0.0
            for k in range(d):
                e = theta[k] - theta_star[k]
                err += e * e
            g_err[gi] = math.sqrt(err)
            g_regret[gi] = regret
            g_count[gi] = count
            g_lam[gi] = _min_eig_info(sigma)
            g_tr[gi] = _trace(sigma)
            gi += 1
    return (
        fault, count, updates, last_explore,
        g_err, g_regret, g_count, g_lam, g_tr,
        f_explore, f_p, f_phat, f_x, f_int, f_tr, f_lam, f_sq, f_theta,
    )


def threshold(t: int, gamma: float) -> float:
    """``A(t) = t**gamma * ln t`` for ``t >= 2``; zero for ``t`` in {0, 1}."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return float(_threshold(int(t), float(gamma)))


def switch_decision(tr_sigma: float, t: int, gamma: float) -> Phase:
    """Phase at step ``t`` given the covariance trace after step ``t - 1``."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    return Phase.EXPLORE if _explores(float(tr_sigma), int(t), float(gamma)) else Phase.EXPLOIT


def initial_planner(d: int, rho: float = DEFAULT_RHO, theta0: Sequence[float] | None = None) -> PlannerState:
    return PlannerState(estimator=initial_state(d, rho, theta0))


def raid_step(
    agent: AgentSpec,
    planner: PlannerState,
    x_des: float,
    params: ScheduleParams,
    streams: AgentStreams,
    agent_index: int = 0,
) -> tuple[StepRecord, PlannerState]:
    """Advance one agent by one step.

    Draws from ``streams.probe`` only on probing steps and from
    ``streams.noise`` on every step, which is exactly how
    :func:`simulate_agent` consumes its pre-drawn streams.
    """
    if not agent.X.contains_interior(x_des):
        raise ValueError(f"x_des={x_des} is not strictly inside [{agent.X.lo}, {agent.X.hi}]")
    t = planner.t + 1
    est = planner.estimator
    explore = bool(_explores(_trace(est.sigma), t, params.gamma))
    probe = float(streams.probe.normal(0.0, params.probe_std)) if explore else 0.0
    noise = draw_noise(agent.noise, streams.noise)

    theta = est.theta_hat.copy()
    sigma = est.sigma.copy()
    xi = np.empty(est.d)
    p, p_hat, x, interior, ok, updated = _advance(
        agent.theta, agent.X.lo, agent.X.hi, float(x_des), theta, sigma, xi, explore, probe, noise
    )
    if not ok:
        raise EstimatorFault(f"degenerate covariance update at step {t}")
    new_est = EstimatorState(theta, sigma, est.info_updates + 1) if updated else est
    phase = Phase.EXPLORE if explore else Phase.EXPLOIT
    record = StepRecord(
        t=t,
        agent=agent_index,
        phase=phase,
        p=p,
        p_hat=p_hat,
        x=x,
        interior=bool(interior),
        theta_hat=new_est.theta_hat,
        tr_sigma=float(_trace(new_est.sigma)),
        lambda_min_info=float(_min_eig_info(new_est.sigma)),
        sq_track_err=(x - x_des) * (x - x_des),
    )
    state = PlannerState(
        estimator=new_est,
        phase=phase,
        exploration_count=planner.exploration_count + int(explore),
        t=t,
    )
    return record, state


@dataclass(eq=False)
class AgentTrajectory:
    """Outcome of simulating one agent for ``T`` steps.

    ``grid_*`` arrays hold metrics sampled after the steps listed in ``grid``;
    the per-step arrays are filled only when the full record was requested.
    """

    agent: int
    x_des: float
    theta_star: np.ndarray
    final: PlannerState
    grid: np.ndarray
    grid_theta_err: np.ndarray
    grid_regret: np.ndarray
    grid_exploration_count: np.ndarray
    grid_lambda_min_info: np.ndarray
    grid_tr_sigma: np.ndarray
    explore: np.ndarray
    p: np.ndarray
    p_hat: np.ndarray
    x: np.ndarray
    interior: np.ndarray
    tr_sigma: np.ndarray
    lambda_min_info: np.ndarray
    sq_track_err: np.ndarray
    theta_hat: np.ndarray

    def __len__(self) -> int:
        return self.p.size

    def phase(self, i: int) -> Phase:
        return Phase.EXPLORE if self.explore[i] else Phase.EXPLOIT

    def __getitem__(self, i: int) -> StepRecord:
        n = len(self)
        if not -n <= i < n:
            raise IndexError(i)
        i %= n
        return StepRecord(
            t=i + 1,
            agent=self.agent,
            phase=self.phase(i),
            p=float(self.p[i]),
            p_hat=float(self.p_hat[i]),
            x=float(self.x[i]),
            interior=bool(self.interior[i]),
            theta_hat=self.theta_hat[i].copy(),
            tr_sigma=float(self.tr_sigma[i]),
            lambda_min_info=float(self.lambda_min_info[i]),
            sq_track_err=float(self.sq_track_err[i]),
        )

    def __iter__(self) -> Iterator[StepRecord]:
        for i in range(len(self)):
            yield self[i]


def simulate_agent(
    agent: AgentSpec,
    x_des: float,
    params: ScheduleParams | None,
    T: int,
    run_seed: int,
    agent_index: int = 0,
    *,
    rho: float = DEFAULT_RHO,
    theta0: Sequence[float] | None = None,
    grid: np.ndarray | None = None,
    full: bool = True,
    force_explore: bool = False,
    probe_sigma2: float | None = None,
) -> AgentTrajectory:
    """Run one agent of a run for ``T`` steps.

    ``force_explore`` skips the schedule and probes every step. It is
    used to study the information growth of pure probing, in which case
    ``probe_sigma2`` may override the schedule's probing variance, zero
    included.
    """
    if T < 0:
        raise ValueError(f"horizon must be non-negative, got {T}")
    if not agent.X.contains_interior(x_des):
        raise ValueError(f"x_des={x_des} is not strictly inside [{agent.X.lo}, {agent.X.hi}]")
    if params is None and not force_explore:
        raise ValueError("schedule parameters are required unless probing is forced")
    gamma = params.gamma if params is not None else GAMMA_MIN
    sigma2 = probe_sigma2 if probe_sigma2 is not None else params.sigma2
    if not sigma2 >= 0:
        raise ValueError(f"probing variance must be non-negative, got {sigma2}")

    streams = agent_streams(run_seed, agent_index)
    probes = streams.probe.normal(0.0, math.sqrt(sigma2), T)
    noises = noise_series(agent.noise, streams.noise, T)
    start = initial_state(agent.d, rho, theta0)
    theta = start.theta_hat.copy()
    sigma = start.sigma.copy()
    grid = np.zeros(0, dtype=np.int64) if grid is None else np.asarray(grid, dtype=np.int64)

    out = _run_agent(
        agent.theta, agent.X.lo, agent.X.hi, float(x_des), float(gamma),
        probes, noises, theta, sigma, int(T), bool(force_explore), bool(full), grid,
    )
    fault, count, updates, last_explore = out[:4]
    if fault:
        raise EstimatorFault(f"agent {agent_index}: degenerate covariance update at step {fault}")
    if T == 0:
        last_phase = None
    else:
        last_phase = Phase.EXPLORE if last_explore else Phase.EXPLOIT
    final = PlannerState(
        estimator=EstimatorState(theta, sigma, int(updates)),
        phase=last_phase,
        exploration_count=int(count),
        t=int(T),
    )
    return AgentTrajectory(
        agent_index, float(x_des), agent.theta, final, grid, *out[4:]
    )


def run_horizon(
    agents: Sequence[AgentSpec],
    x_des: Sequence[float],
    params: ScheduleParams,
    T: int,
    seed: int,
    *,
    rho: float = DEFAULT_RHO,
    theta0: Sequence[Sequence[float] | None] | None = None,
    grid: np.ndarray | None = None,
    full: bool = True,
) -> list[AgentTrajectory]:
    """Simulate every agent of one run. Agents are independent, so they run one after another."""
    if len(x_des) != len(agents):
        raise ValueError(f"{len(agents)} agents but {len(x_des)} desired actions")
    inits = theta0 if theta0 is not None else [None] * len(agents)
    return [
        simulate_agent(
            agent, x_des[i], params, T, seed, i, rho=rho, theta0=inits[i], grid=grid, full=full
        )
        for i, agent in enumerate(agents)
    ]
