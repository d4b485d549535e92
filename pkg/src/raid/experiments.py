"""Monte Carlo harness: regret bookkeeping, cross-seed aggregation, rate fits and excitation checks."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np
from numba import njit

from .agents import AgentSpec, _best_response, _is_interior
from .estimator import DEFAULT_RHO
from .polybasis import _gradient_into
from .policy import ScheduleParams, simulate_agent, threshold
from .seeding import PROBE_STREAM, stream

if TYPE_CHECKING:
    from .scenario import Scenario

__all__ = [
    "RegretAccumulator",
    "regret_update",
    "log_grid",
    "SeedResult",
    "AggregateSeries",
    "aggregate",
    "MonteCarloResult",
    "run_seed",
    "run_monte_carlo",
    "RateFit",
    "fit_rate",
    "ExcitationEstimate",
    "empirical_excitation",
    "excitation_margin",
    "probing_information_growth",
    "exploration_ratio",
    "information_ratio",
]

log = logging.getLogger(__name__)

GRID_POINTS = 200
TOTAL = "all"


@dataclass
class RegretAccumulator:
    cumulative: float = 0.0
    per_step: list[float] = field(default_factory=list)


def regret_update(acc: RegretAccumulator, x: Sequence[float], x_des: Sequence[float]) -> RegretAccumulator:
    """Append ``||x - x_des||^2`` to ``acc`` (in place) and return it."""
    x = np.asarray(x, dtype=np.float64)
    x_des = np.asarray(x_des, dtype=np.float64)
    if x.shape != x_des.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {x_des.shape}")
    inc = float(np.sum((x - x_des) ** 2))
    acc.per_step.append(inc)
    acc.cumulative += inc
    return acc


def log_grid(T: int, points: int = GRID_POINTS) -> np.ndarray:
    """At most ``points`` distinct, log-spaced step indices in ``[1, T]``, always including both ends."""
    if T < 1:
        return np.zeros(0, dtype=np.int64)
    raw = np.rint(np.geomspace(1.0, float(T), points)).astype(np.int64)
    return np.unique(np.clip(raw, 1, T))


@dataclass(eq=False)
class SeedResult:
    """Metrics of one run sampled on the grid; arrays are ``(n_agents, G)``."""

    seed: int
    grid: np.ndarray
    theta_err: np.ndarray
    regret: np.ndarray
    exploration_count: np.ndarray
    lambda_min_info: np.ndarray
    tr_sigma: np.ndarray

    @property
    def n_agents(self) -> int:
        return self.theta_err.shape[0]

    def avg_regret(self) -> np.ndarray:
        return self.regret / self.grid

    def total_theta_err(self) -> np.ndarray:
        return np.sqrt(np.sum(self.theta_err**2, axis=0))

    def total_avg_regret(self) -> np.ndarray:
        return np.sum(self.regret, axis=0) / self.grid


@dataclass(eq=False)
class AggregateSeries:
    """Population mean and standard deviation across seeds.

    Row ``k < n_agents`` belongs to agent ``k``; the last row, labelled
    ``"all"``, covers the whole population: stacked type error and joint
    average regret.
    """

    t: np.ndarray
    labels: list[str]
    mean_theta_err: np.ndarray
    std_theta_err: np.ndarray
    mean_avg_regret: np.ndarray
    std_avg_regret: np.ndarray
    n_runs: int

    def row(self, label: str | int) -> int:
        return self.labels.index(str(label))


def aggregate(results: Sequence[SeedResult]) -> AggregateSeries:
    if not results:
        raise ValueError("need at least one seed result")
    grid = results[0].grid
    n = results[0].n_agents
    for r in results:
        if r.grid.shape != grid.shape or np.any(r.grid != grid) or r.n_agents != n:
            raise ValueError("seed results disagree on grid or population")
    err = np.stack([np.vstack([r.theta_err, r.total_theta_err()]) for r in results])
    reg = np.stack([np.vstack([r.avg_regret(), r.total_avg_regret()]) for r in results])
    return AggregateSeries(
        t=grid.copy(),
        labels=[str(i) for i in range(n)] + [TOTAL],
        mean_theta_err=err.mean(axis=0),
        std_theta_err=err.std(axis=0),
        mean_avg_regret=reg.mean(axis=0),
        std_avg_regret=reg.std(axis=0),
        n_runs=len(results),
    )


@dataclass(eq=False)
class MonteCarloResult:
    seeds: list[int]
    runs: list[SeedResult]
    aggregate: AggregateSeries


def run_seed(scenario: "Scenario", seed: int, grid: np.ndarray | None = None) -> SeedResult:
    """One run of the switching policy for every agent of ``scenario``."""
    grid = log_grid(scenario.horizon, scenario.grid_points) if grid is None else grid
    trajs = [
        simulate_agent(
            agent,
            scenario.x_des[i],
            scenario.schedule,
            scenario.horizon,
            seed,
            i,
            rho=scenario.rho,
            theta0=scenario.theta0_for(i),
            grid=grid,
            full=False,
        )
        for i, agent in enumerate(scenario.agents)
    ]
    return SeedResult(
        seed=seed,
        grid=grid,
        theta_err=np.vstack([t.grid_theta_err for t in trajs]),
        regret=np.vstack([t.grid_regret for t in trajs]),
        exploration_count=np.vstack([t.grid_exploration_count for t in trajs]),
        lambda_min_info=np.vstack([t.grid_lambda_min_info for t in trajs]),
        tr_sigma=np.vstack([t.grid_tr_sigma for t in trajs]),
    )


def run_monte_carlo(scenario: "Scenario", seeds: Sequence[int] | None = None, jobs: int = 1) -> MonteCarloResult:
    """Independent runs over ``seeds`` (default: the scenario's seeds), reduced in seed order.

    Any failing seed aborts the whole batch.
    """
    seeds = list(scenario.run_seeds() if seeds is None else seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    grid = log_grid(scenario.horizon, scenario.grid_points)
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(run_seed, [scenario] * len(seeds), seeds, [grid] * len(seeds)))
    else:
        runs = []
        for k, s in enumerate(seeds):
            runs.append(run_seed(scenario, s, grid))
            log.debug("seed %d/%d done", k + 1, len(seeds))
    return MonteCarloResult(seeds=seeds, runs=runs, aggregate=aggregate(runs))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple[float, float]

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "window": list(self.window),
        }


def fit_rate(t: np.ndarray, y: np.ndarray, window: tuple[float, float], min_points: int = 10) -> RateFit:
    """Least-squares line through ``(ln t, ln y)`` for grid points with ``t`` inside ``window``."""
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    t_min, t_max = window
    if not t_min < t_max:
        raise ValueError(f"empty window {window}")
    mask = (t >= t_min) & (t <= t_max)
    if mask.sum() < min_points:
        raise ValueError(f"only {int(mask.sum())} grid points in window {window}, need {min_points}")
    ys = y[mask]
    if np.any(~(ys > 0)):
        raise ValueError("metric must be positive inside the fit window")
    lx = np.log(t[mask])
    ly = np.log(ys)
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0), (float(t_min), float(t_max)))


@njit(cache=True)
def _excitation_blocks(theta_star, lo, hi, probes, blocks):
    d = theta_star.size
    N = probes.size
    out = np.zeros((blocks, d, d))
    xi = np.empty(d)
    for n in range(N):
        x = _best_response(theta_star, lo, hi, probes[n])
        if not _is_interior(x, lo, hi):
            continue
        _gradient_into(x, xi)
        b = n * blocks // N
        for i in range(d):
            for j in range(d):
                out[b, i, j] += xi[i] * xi[j]
    return out


def _excitation_sums(agent: AgentSpec, sigma2: float, N: int, seed: int, blocks: int) -> np.ndarray:
    if N < 1:
        raise ValueError(f"need at least one sample, got {N}")
    rng = stream(seed, 0, PROBE_STREAM)
    probes = rng.normal(0.0, math.sqrt(sigma2), N)
    return _excitation_blocks(agent.theta, agent.X.lo, agent.X.hi, probes, blocks)


def empirical_excitation(agent: AgentSpec, sigma2: float, N: int, seed: int) -> np.ndarray:
    """Sample mean of ``xi xi' * delta`` over ``N`` Gaussian probes of variance ``sigma2``."""
    m = _excitation_sums(agent, sigma2, N, seed, 1).sum(axis=0) / N
    return 0.5 * (m + m.T)


@dataclass(frozen=True, eq=False)
class ExcitationEstimate:
    matrix: np.ndarray
    lambda_min: float
    std_error: float

    @property
    def z_score(self) -> float:
        return self.lambda_min / self.std_error if self.std_error > 0 else math.inf


def excitation_margin(agent: AgentSpec, sigma2: float, N: int, seed: int, blocks: int = 100) -> ExcitationEstimate:
    """Smallest eigenvalue of the excitation matrix with a delete-one-block jackknife error bar."""
    blocks = max(2, min(blocks, N))
    sums = _excitation_sums(agent, sigma2, N, seed, blocks)
    counts = np.bincount(np.arange(N) * blocks // N, minlength=blocks).astype(np.float64)
    total = sums.sum(axis=0)
    full = total / N
    lam = float(np.linalg.eigvalsh(0.5 * (full + full.T))[0])
    leave_out = np.array(
        [np.linalg.eigvalsh((total - sums[b]) / (N - counts[b]))[0] for b in range(blocks)]
    )
    se = math.sqrt((blocks - 1) / blocks * float(np.sum((leave_out - leave_out.mean()) ** 2)))
    return ExcitationEstimate(matrix=full, lambda_min=lam, std_error=se)


def probing_information_growth(
    agent: AgentSpec,
    sigma2: float,
    T: int,
    seed: int,
    *,
    rho: float = DEFAULT_RHO,
    grid: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Pure Gaussian probing every step; returns ``(t, lambda_min(Sigma^{-1}(t)) / t)`` on a log grid."""
    if T < 100:
        raise ValueError(f"horizon must be at least 100, got {T}")
    grid = log_grid(T) if grid is None else np.asarray(grid, dtype=np.int64)
    traj = simulate_agent(
        agent,
        0.5 * (agent.X.lo + agent.X.hi),
        None,
        T,
        seed,
        0,
        rho=rho,
        grid=grid,
        full=False,
        force_explore=True,
        probe_sigma2=sigma2,
    )
    return grid, traj.grid_lambda_min_info / grid


def exploration_ratio(result: SeedResult, gamma: float) -> np.ndarray:
    """``#(t) / A(t)`` per agent on the grid (undefined where ``A(t) = 0``)."""
    a = np.array([threshold(int(t), gamma) for t in result.grid])
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > 0, result.exploration_count / a, np.nan)


def information_ratio(result: SeedResult, gamma: float) -> np.ndarray:
    """``lambda_min(Sigma^{-1}(t)) / A(t)`` per agent on the grid."""
    a = np.array([threshold(int(t), gamma) for t in result.grid])
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > 0, result.lambda_min_info / a, np.nan)
