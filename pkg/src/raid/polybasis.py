"""Monomial basis Phi(x) = (x, x^2, ..., x^d), its derivatives, and type admissibility.

The jitted ``_*`` kernels are the single source of truth for every basis
evaluation; both the public wrappers and the simulation loops call them so
that the same floating point operations happen in the same order everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "CurvatureBounds",
    "StrategyInterval",
    "monomial_basis",
    "basis_gradient",
    "basis_hessian",
    "curvature",
    "check_admissible",
]

ADMISSIBILITY_GRID = 1025
GOLDEN_TOL = 1e-10
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CurvatureBounds:
    """Strong-convexity modulus ``m`` and gradient Lipschitz constant ``M``."""

    m: float
    M: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.m) and math.isfinite(self.M)):
            raise ValueError(f"curvature bounds must be finite, got ({self.m}, {self.M})")
        if not 0.0 < self.m <= self.M:
            raise ValueError(f"need 0 < m <= M, got m={self.m}, M={self.M}")


@dataclass(frozen=True)
class StrategyInterval:
    """Compact strategy set ``[lo, hi]``."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval endpoints must be finite, got [{self.lo}, {self.hi}]")
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains_interior(self, x: float) -> bool:
        return self.lo < x < self.hi


@njit(cache=True)
def _basis_into(x, out):
    power = x
    for k in range(out.size):
        out[k] = power
        power *= x


@njit(cache=True)
def _gradient_into(x, out):
    power = 1.0
    for k in range(out.size):
        out[k] = (k + 1) * power
        power *= x


@njit(cache=True)
def _hessian_into(x, out):
    if out.size > 0:
        out[0] = 0.0
    power = 1.0
    for k in range(1, out.size):
        out[k] = ((k + 1) * k) * power
        power *= x


@njit(cache=True)
def _directional_gradient(theta, x):
    """theta . grad Phi(x), accumulated term by term."""
    total = 0.0
    power = 1.0
    for k in range(theta.size):
        total += theta[k] * ((k + 1) * power)
        power *= x
    return total


@njit(cache=True)
def _directional_hessian(theta, x):
    total = 0.0
    power = 1.0
    for k in range(1, theta.size):
        total += theta[k] * (((k + 1) * k) * power)
        power *= x
    return total


@njit(cache=True)
def _cost(theta, x, p):
    total = 0.0
    power = x
    for k in range(theta.size):
        total += theta[k] * power
        power *= x
    return total + p * x


def _check_dim(d: int) -> None:
    if d < 1:
        raise ValueError(f"basis dimension must be positive, got {d}")


def monomial_basis(x: float, d: int) -> np.ndarray:
    """Return ``(x, x**2, ..., x**d)``."""
    _check_dim(d)
    out = np.empty(d)
    _basis_into(float(x), out)
    return out


def basis_gradient(x: float, d: int) -> np.ndarray:
    """Return ``(1, 2x, 3x**2, ..., d*x**(d-1))``."""
    _check_dim(d)
    out = np.empty(d)
    _gradient_into(float(x), out)
    return out


def basis_hessian(x: float, d: int) -> np.ndarray:
    """Return ``(0, 2, 6x, ..., d*(d-1)*x**(d-2))``."""
    _check_dim(d)
    out = np.empty(d)
    _hessian_into(float(x), out)
    return out


def curvature(theta, x: float) -> float:
    """Second derivative ``theta . hess Phi(x)`` of the nominal cost."""
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    return float(_directional_hessian(theta, float(x)))


def _golden_min(f, a: float, b: float, tol: float = GOLDEN_TOL) -> float:
    """Minimum value of a unimodal-on-bracket scalar function over [a, b]."""
    c = b - _INV_PHI * (b - a)
    e = a + _INV_PHI * (b - a)
    fc, fe = f(c), f(e)
    while b - a > tol:
        if fc < fe:
            b, e, fe = e, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + _INV_PHI * (b - a)
            fe = f(e)
    return min(fc, fe, f(0.5 * (a + b)))


def _curvature_range(theta: np.ndarray, X: StrategyInterval) -> tuple[float, float]:
    grid = np.linspace(X.lo, X.hi, ADMISSIBILITY_GRID)
    values = np.array([_directional_hessian(theta, x) for x in grid])
    lo_i = int(np.argmin(values))
    hi_i = int(np.argmax(values))

    def bracket(i: int) -> tuple[float, float]:
        return grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]

    q_min = min(values[lo_i], _golden_min(lambda x: _directional_hessian(theta, x), *bracket(lo_i)))
    q_max = max(values[hi_i], -_golden_min(lambda x: -_directional_hessian(theta, x), *bracket(hi_i)))
    return float(q_min), float(q_max)


def check_admissible(theta, bounds: CurvatureBounds, X: StrategyInterval) -> bool:
    """True iff ``m <= theta . hess Phi(x) <= M`` for every ``x`` in ``X``.

    The curvature polynomial is scanned on a 1025-point grid that includes
    both endpoints, then the grid extremes are polished by golden-section
    search. A relative slack of 1e-12 absorbs rounding at bounds that are
    attained exactly.
    """
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if theta.ndim != 1 or theta.size < 2:
        raise ValueError("type parameter must be a vector with at least two entries")
    if not np.all(np.isfinite(theta)):
        raise ValueError("type parameter must be finite")
    q_min, q_max = _curvature_range(theta, X)
    slack = 1e-12 * max(1.0, abs(bounds.M))
    return bool(q_min >= bounds.m - slack and q_max <= bounds.M + slack)
