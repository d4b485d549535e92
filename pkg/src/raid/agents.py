"""Agents with polynomial nominal costs that best-respond to a linear incentive."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from .polybasis import (
    CurvatureBounds,
    StrategyInterval,
    _cost,
    _directional_gradient,
    check_admissible,
)

__all__ = [
    "NoiseKind",
    "NoiseSpec",
    "AgentSpec",
    "Response",
    "InadmissibleAgentError",
    "best_response",
    "observe",
    "draw_noise",
    "noise_series",
    "desired_incentive",
    "agent_cost",
    "interior_margin",
]

BISECTION_WIDTH = 1e-12
INTERIOR_MARGIN = 1e-9


class InadmissibleAgentError(ValueError):
    """The true type violates the curvature bounds on the strategy interval."""


class NoiseKind(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    RADEMACHER = "rademacher"
    NONE = "none"


@dataclass(frozen=True)
class NoiseSpec:
    """Observation noise law.

    ``scale`` is the variance for gaussian noise, the half-width for uniform
    noise and the magnitude for Rademacher noise. It is ignored for ``none``.
    """

    kind: NoiseKind = NoiseKind.NONE
    scale: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.kind is not NoiseKind.NONE and not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"{self.kind.value} noise needs a positive finite scale, got {self.scale}")


@dataclass(frozen=True)
class AgentSpec:
    theta_star: tuple[float, ...]
    X: StrategyInterval
    bounds: CurvatureBounds
    noise: NoiseSpec = NoiseSpec()

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta_star", tuple(float(v) for v in self.theta_star))
        if len(self.theta_star) < 2:
            raise InadmissibleAgentError("type parameter needs at least two coefficients (x and x^2)")
        if not check_admissible(self.theta_star, self.bounds, self.X):
            raise InadmissibleAgentError(
                f"type {self.theta_star} violates curvature bounds "
                f"[{self.bounds.m}, {self.bounds.M}] on [{self.X.lo}, {self.X.hi}]"
            )

    @property
    def d(self) -> int:
        return len(self.theta_star)

    @property
    def theta(self) -> np.ndarray:
        return np.array(self.theta_star, dtype=np.float64)


@dataclass(frozen=True)
class Response:
    x: float
    interior: bool


@njit(cache=True)
def _best_response(theta, lo, hi, p):
    if _directional_gradient(theta, lo) + p >= 0.0:
        return lo
    if _directional_gradient(theta, hi) + p <= 0.0:
        return hi
    a = lo
    b = hi
    while b - a > BISECTION_WIDTH:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        g = _directional_gradient(theta, mid) + p
        if g == 0.0:
            return mid
        if g < 0.0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


@njit(cache=True)
def _is_interior(x, lo, hi):
    eta = INTERIOR_MARGIN * (hi - lo)
    return lo + eta < x < hi - eta


def interior_margin(X: StrategyInterval) -> float:
    """Distance from an endpoint below which a response counts as a boundary response."""
    return INTERIOR_MARGIN * X.width


def best_response(agent: AgentSpec, p: float) -> Response:
    """Minimiser of ``theta*.Phi(x) + p*x`` over the agent's interval.

    The cost derivative is strictly increasing, so the minimiser is an
    endpoint when the derivative does not change sign and is otherwise found
    by bisection down to a bracket of width 1e-12.
    """
    if not math.isfinite(p):
        raise ValueError(f"incentive must be finite, got {p}")
    lo, hi = agent.X.lo, agent.X.hi
    x = float(_best_response(agent.theta, lo, hi, float(p)))
    return Response(x=x, interior=bool(_is_interior(x, lo, hi)))


def agent_cost(agent: AgentSpec, x: float, p: float) -> float:
    return float(_cost(agent.theta, float(x), float(p)))


def observe(p: float, noise_draw: float) -> float:
    """Noisy incentive observation. For interior responses ``p`` equals ``-theta*.grad Phi(x)``."""
    return p + noise_draw


def draw_noise(spec: NoiseSpec, rng: np.random.Generator) -> float:
    kind = spec.kind
    if kind is NoiseKind.NONE:
        return 0.0
    if kind is NoiseKind.GAUSSIAN:
        return float(rng.normal(0.0, math.sqrt(spec.scale)))
    if kind is NoiseKind.UNIFORM:
        return float(rng.uniform(-spec.scale, spec.scale))
    return spec.scale if rng.random() < 0.5 else -spec.scale


def noise_series(spec: NoiseSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` consecutive draws; identical to calling :func:`draw_noise` ``size`` times."""
    kind = spec.kind
    if kind is NoiseKind.NONE:
        return np.zeros(size)
    if kind is NoiseKind.GAUSSIAN:
        return rng.normal(0.0, math.sqrt(spec.scale), size)
    if kind is NoiseKind.UNIFORM:
        return rng.uniform(-spec.scale, spec.scale, size)
    return np.where(rng.random(size) < 0.5, spec.scale, -spec.scale)


def desired_incentive(theta, x_des: float) -> float:
    """Incentive ``-theta.grad Phi(x_des)`` that elicits ``x_des`` from an agent of type ``theta``."""
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    return -float(_directional_gradient(theta, float(x_des)))
