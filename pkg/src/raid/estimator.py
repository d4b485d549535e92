"""Gated recursive least-squares type estimator and its batch oracle.

The recursion tracks the minimiser of

    (theta - theta0)' Sigma0^{-1} (theta - theta0) + sum_{gated} (theta . xi + p_hat)^2

by a Sherman-Morrison rank-one downdate of the covariance, followed by the
estimate correction that uses the *updated* covariance. Samples whose gate
is closed (boundary responses) are skipped entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numba import njit

__all__ = [
    "DEFAULT_RHO",
    "EstimatorFault",
    "EstimatorState",
    "Regressor",
    "initial_state",
    "rls_update",
    "min_eigenvalue_info",
    "trace_sigma",
    "batch_ls_oracle",
]

DEFAULT_RHO = 10.0
DENOMINATOR_FLOOR = 1e-300


class EstimatorFault(ArithmeticError):
    """Sherman-Morrison denominator collapsed; the covariance is no longer positive definite."""


@dataclass(frozen=True, eq=False)
class EstimatorState:
    theta_hat: np.ndarray
    sigma: np.ndarray
    info_updates: int = 0

    def __post_init__(self) -> None:
        theta = np.array(self.theta_hat, dtype=np.float64)
        sigma = np.array(self.sigma, dtype=np.float64)
        if theta.ndim != 1 or sigma.shape != (theta.size, theta.size):
            raise ValueError(f"shape mismatch: theta {theta.shape}, sigma {sigma.shape}")
        theta.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "theta_hat", theta)
        object.__setattr__(self, "sigma", sigma)

    @property
    def d(self) -> int:
        return self.theta_hat.size

    def same_as(self, other: "EstimatorState") -> bool:
        """Bit-level equality of estimate and covariance."""
        return (
            self.info_updates == other.info_updates
            and self.theta_hat.tobytes() == other.theta_hat.tobytes()
            and self.sigma.tobytes() == other.sigma.tobytes()
        )


@dataclass(frozen=True, eq=False)
class Regressor:
    xi: np.ndarray
    p_hat: float
    delta: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "p_hat", float(self.p_hat))
        object.__setattr__(self, "delta", bool(self.delta))


def initial_state(d: int, rho: float = DEFAULT_RHO, theta0: Sequence[float] | None = None) -> EstimatorState:
    """Prior ``theta_hat(0) = theta0`` (zero by default) and ``Sigma(0) = rho * I``."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    theta = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=np.float64)
    if theta.shape != (d,):
        raise ValueError(f"theta0 must have length {d}")
    return EstimatorState(theta, rho * np.eye(d))


@njit(cache=True)
def _rls_update_inplace(theta, sigma, xi, p_hat):
    """Absorb one gated sample in place. Returns False on a degenerate denominator."""
    d = xi.size
    s_xi = np.zeros(d)
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += sigma[i, j] * xi[j]
        s_xi[i] = acc
    denom = 1.0
    for i in range(d):
        denom += xi[i] * s_xi[i]
    if not denom > DENOMINATOR_FLOOR:
        return False
    for i in range(d):
        for j in range(d):
            sigma[i, j] -= s_xi[i] * s_xi[j] / denom
    for i in range(d):
        for j in range(i + 1, d):
            v = 0.5 * (sigma[i, j] + sigma[j, i])
            sigma[i, j] = v
            sigma[j, i] = v
    resid = p_hat
    for i in range(d):
        resid += xi[i] * theta[i]
    for i in range(d):
        gain = 0.0
        for j in range(d):
            gain += sigma[i, j] * xi[j]
        theta[i] -= gain * resid
    return True


@njit(cache=True)
def _trace(sigma):
    total = 0.0
    for i in range(sigma.shape[0]):
        total += sigma[i, i]
    return total


@njit(cache=True)
def _min_eig_info(sigma):
    return 1.0 / np.linalg.eigvalsh(sigma)[-1]


def rls_update(state: EstimatorState, r: Regressor) -> EstimatorState:
    """Return the estimator after observing ``r``; ``state`` is left untouched."""
    if not r.delta:
        return state
    if r.xi.size != state.d:
        raise ValueError(f"regressor length {r.xi.size} != estimator dimension {state.d}")
    theta = state.theta_hat.copy()
    sigma = state.sigma.copy()
    if not _rls_update_inplace(theta, sigma, r.xi, r.p_hat):
        raise EstimatorFault("Sherman-Morrison denominator <= 1e-300")
    return EstimatorState(theta, sigma, state.info_updates + 1)


def min_eigenvalue_info(state: EstimatorState) -> float:
    """Smallest eigenvalue of the information matrix ``Sigma^{-1}``, i.e. ``1 / lambda_max(Sigma)``."""
    return float(1.0 / np.linalg.eigvalsh(state.sigma)[-1])


def trace_sigma(state: EstimatorState) -> float:
    return float(_trace(state.sigma))


def batch_ls_oracle(
    trajectory: Iterable[Regressor],
    theta0: Sequence[float],
    sigma0: np.ndarray,
) -> np.ndarray:
    """Exact regularised least-squares solution via the normal equations.

    Entries of the information matrix and right-hand side are accumulated
    with :func:`math.fsum`, which is correctly rounded and therefore
    independent of sample order.
    """
    theta0 = np.asarray(theta0, dtype=np.float64)
    sigma0 = np.asarray(sigma0, dtype=np.float64)
    d = theta0.size
    prior_info = np.linalg.inv(sigma0)
    prior_info = 0.5 * (prior_info + prior_info.T)
    prior_rhs = prior_info @ theta0

    info_terms: list[list[list[float]]] = [[[prior_info[i, j]] for j in range(d)] for i in range(d)]
    rhs_terms: list[list[float]] = [[prior_rhs[i]] for i in range(d)]
    for r in trajectory:
        if not r.delta:
            continue
        xi = r.xi
        for i in range(d):
            rhs_terms[i].append(-xi[i] * r.p_hat)
            for j in range(d):
                info_terms[i][j].append(xi[i] * xi[j])
    info = np.array([[math.fsum(info_terms[i][j]) for j in range(d)] for i in range(d)])
    rhs = np.array([math.fsum(rhs_terms[i]) for i in range(d)])
    return np.linalg.solve(info, rhs)
