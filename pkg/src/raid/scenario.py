"""Scenario documents.

A scenario is a YAML mapping::

    name: three-agent-cubic          # optional label
    horizon: 100000                  # steps per run
    x_des: [0.5, 0.5, 0.5]           # one strictly interior action per agent
    schedule: {gamma: 2/3, sigma2: 2.0}
    estimator:                       # optional
      rho: 10.0                      # Sigma(0) = rho * I
      theta0: null                   # or one initial estimate per agent
    seeds: {base: 1729, count: 100}  # or an explicit list of run seeds
    rate_window: [1000, 100000]      # optional, defaults to [T/100, T]
    grid_points: 200                 # optional
    agents:
      - theta_star: [1.0, 0.5, 0.0]
        interval: [-1.0, 1.0]
        curvature: {m: 1.0, M: 1.0}
        noise: {kind: gaussian, scale: 0.1}   # gaussian | uniform | rademacher | none

Numbers may be written as fractions (``2/3``). Unknown keys are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as _replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .agents import AgentSpec, InadmissibleAgentError, NoiseKind, NoiseSpec
from .estimator import DEFAULT_RHO
from .experiments import GRID_POINTS
from .polybasis import CurvatureBounds, StrategyInterval
from .policy import ScheduleParams
from .seeding import run_seeds as derive_run_seeds

__all__ = [
    "ScenarioError",
    "ScenarioParseError",
    "Scenario",
    "parse_scenario",
    "load_scenario",
    "serialize_scenario",
    "builtin_scenario_path",
]


class ScenarioError(ValueError):
    """Invalid scenario; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ScenarioParseError(ScenarioError):
    """The document is not well-formed YAML or not a mapping."""


@dataclass(frozen=True)
class Scenario:
    agents: tuple[AgentSpec, ...]
    x_des: tuple[float, ...]
    schedule: ScheduleParams
    horizon: int
    seed_base: int | None = None
    seed_count: int | None = None
    seed_list: tuple[int, ...] | None = None
    rho: float = DEFAULT_RHO
    theta0: tuple[tuple[float, ...], ...] | None = None
    rate_window: tuple[float, float] | None = None
    grid_points: int = GRID_POINTS
    name: str = ""

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def d(self) -> int:
        return self.agents[0].d

    def run_seeds(self) -> list[int]:
        if self.seed_list is not None:
            return list(self.seed_list)
        return derive_run_seeds(self.seed_base, self.seed_count)

    def theta0_for(self, i: int) -> tuple[float, ...] | None:
        return None if self.theta0 is None else self.theta0[i]

    def window(self) -> tuple[float, float]:
        if self.rate_window is not None:
            return self.rate_window
        return (self.horizon / 100.0, float(self.horizon))

    def to_dict(self) -> dict[str, Any]:
        seeds: Any
        if self.seed_list is not None:
            seeds = list(self.seed_list)
        else:
            seeds = {"base": self.seed_base, "count": self.seed_count}
        return {
            "name": self.name,
            "horizon": self.horizon,
            "x_des": list(self.x_des),
            "schedule": {"gamma": self.schedule.gamma, "sigma2": self.schedule.sigma2},
            "estimator": {
                "rho": self.rho,
                "theta0": None if self.theta0 is None else [list(t) for t in self.theta0],
            },
            "seeds": seeds,
            "rate_window": None if self.rate_window is None else list(self.rate_window),
            "grid_points": self.grid_points,
            "agents": [
                {
                    "theta_star": list(a.theta_star),
                    "interval": [a.X.lo, a.X.hi],
                    "curvature": {"m": a.bounds.m, "M": a.bounds.M},
                    "noise": {"kind": a.noise.kind.value, "scale": a.noise.scale},
                }
                for a in self.agents
            ],
        }

    def replace(self, **changes: Any) -> "Scenario":
        return _replace(self, **changes)


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        try:
            out = float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise ScenarioError(path, f"expected a number, got {value!r}") from None
    else:
        raise ScenarioError(path, f"expected a number, got {value!r}")
    if not math.isfinite(out):
        raise ScenarioError(path, f"must be finite, got {value!r}")
    return out


def _integer(value: Any, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(path, f"must be >= {minimum}, got {value}")
    return value


def _vector(value: Any, path: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ScenarioError(path, f"expected a non-empty list of numbers, got {value!r}")
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))


def _mapping(value: Any, path: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(value, dict):
        raise ScenarioError(path, f"expected a mapping, got {value!r}")
    unknown = set(value) - allowed
    if unknown:
        raise ScenarioError(path, f"unknown keys {sorted(unknown)}")
    missing = set(required) - set(value)
    if missing:
        raise ScenarioError(path, f"missing keys {sorted(missing)}")
    return value


def _agent(doc: Any, path: str) -> AgentSpec:
    doc = _mapping(doc, path, {"theta_star", "interval", "curvature", "noise"}, {"theta_star", "interval", "curvature"})
    theta = _vector(doc["theta_star"], f"{path}.theta_star")
    interval = _vector(doc["interval"], f"{path}.interval")
    if len(interval) != 2:
        raise ScenarioError(f"{path}.interval", "expected [lo, hi]")
    try:
        X = StrategyInterval(*interval)
    except ValueError as exc:
        raise ScenarioError(f"{path}.interval", str(exc)) from None
    curv = _mapping(doc["curvature"], f"{path}.curvature", {"m", "M"}, {"m", "M"})
    try:
        bounds = CurvatureBounds(_number(curv["m"], f"{path}.curvature.m"), _number(curv["M"], f"{path}.curvature.M"))
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"{path}.curvature", str(exc)) from None
    noise_doc = _mapping(doc.get("noise", {"kind": "none"}), f"{path}.noise", {"kind", "scale"}, {"kind"})
    kinds = [k.value for k in NoiseKind]
    if noise_doc["kind"] not in kinds:
        raise ScenarioError(f"{path}.noise.kind", f"expected one of {kinds}, got {noise_doc['kind']!r}")
    try:
        noise = NoiseSpec(noise_doc["kind"], _number(noise_doc.get("scale", 0.0), f"{path}.noise.scale"))
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"{path}.noise", str(exc)) from None
    try:
        return AgentSpec(theta, X, bounds, noise)
    except InadmissibleAgentError as exc:
        raise ScenarioError(
            f"{path}.theta_star",
            f"admissible-type condition violated (nominal cost curvature must stay within [m, M]): {exc}",
        ) from None


_TOP_KEYS = {"name", "horizon", "x_des", "schedule", "estimator", "seeds", "rate_window", "grid_points", "agents"}


def _validate(doc: Any) -> Scenario:
    doc = _mapping(doc, "", _TOP_KEYS, {"horizon", "x_des", "schedule", "seeds", "agents"})
    agents_doc = doc["agents"]
    if not isinstance(agents_doc, list) or not agents_doc:
        raise ScenarioError("agents", "expected a non-empty list of agents")
    agents = tuple(_agent(a, f"agents[{i}]") for i, a in enumerate(agents_doc))
    d = agents[0].d
    for i, a in enumerate(agents):
        if a.d != d:
            raise ScenarioError(f"agents[{i}].theta_star", f"all agents must share dimension {d}, got {a.d}")

    x_des = _vector(doc["x_des"], "x_des")
    if len(x_des) != len(agents):
        raise ScenarioError("x_des", f"expected {len(agents)} entries, got {len(x_des)}")
    for i, (x, a) in enumerate(zip(x_des, agents)):
        if not a.X.contains_interior(x):
            raise ScenarioError(
                f"x_des[{i}]",
                f"desired-profile feasibility violated: {x} is not strictly inside [{a.X.lo}, {a.X.hi}]",
            )

    sched = _mapping(doc["schedule"], "schedule", {"gamma", "sigma2"}, {"gamma", "sigma2"})
    try:
        schedule = ScheduleParams(_number(sched["gamma"], "schedule.gamma"), _number(sched["sigma2"], "schedule.sigma2"))
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError("schedule", str(exc)) from None

    horizon = _integer(doc["horizon"], "horizon", minimum=0)

    est = _mapping(doc.get("estimator") or {}, "estimator", {"rho", "theta0"})
    rho = _number(est.get("rho", DEFAULT_RHO), "estimator.rho")
    if not rho > 0:
        raise ScenarioError("estimator.rho", f"must be positive, got {rho}")
    theta0 = None
    if est.get("theta0") is not None:
        raw = est["theta0"]
        if not isinstance(raw, list) or len(raw) != len(agents):
            raise ScenarioError("estimator.theta0", f"expected one vector per agent ({len(agents)})")
        theta0 = tuple(_vector(v, f"estimator.theta0[{i}]") for i, v in enumerate(raw))
        for i, v in enumerate(theta0):
            if len(v) != d:
                raise ScenarioError(f"estimator.theta0[{i}]", f"expected length {d}, got {len(v)}")

    seeds = doc["seeds"]
    seed_base = seed_count = seed_list = None
    if isinstance(seeds, list):
        if not seeds:
            raise ScenarioError("seeds", "seed list must not be empty")
        seed_list = tuple(_integer(s, f"seeds[{i}]", minimum=0) for i, s in enumerate(seeds))
        for i, s in enumerate(seed_list):
            if s >= 2**64:
                raise ScenarioError(f"seeds[{i}]", "must fit in 64 bits")
    else:
        seeds = _mapping(seeds, "seeds", {"base", "count"}, {"base", "count"})
        seed_base = _integer(seeds["base"], "seeds.base", minimum=0)
        if seed_base >= 2**64:
            raise ScenarioError("seeds.base", "must fit in 64 bits")
        seed_count = _integer(seeds["count"], "seeds.count", minimum=1)

    rate_window = None
    if doc.get("rate_window") is not None:
        w = _vector(doc["rate_window"], "rate_window")
        if len(w) != 2 or not 0 < w[0] < w[1]:
            raise ScenarioError("rate_window", f"expected [t_min, t_max] with 0 < t_min < t_max, got {list(w)}")
        rate_window = (w[0], w[1])

    grid_points = _integer(doc.get("grid_points", GRID_POINTS), "grid_points", minimum=2)
    if grid_points > GRID_POINTS:
        raise ScenarioError("grid_points", f"at most {GRID_POINTS} grid points, got {grid_points}")
    name = doc.get("name") or ""
    if not isinstance(name, str):
        raise ScenarioError("name", f"expected a string, got {name!r}")

    return Scenario(
        agents=agents,
        x_des=x_des,
        schedule=schedule,
        horizon=horizon,
        seed_base=seed_base,
        seed_count=seed_count,
        seed_list=seed_list,
        rho=rho,
        theta0=theta0,
        rate_window=rate_window,
        grid_points=grid_points,
        name=name,
    )


def parse_scenario(text: str) -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioParseError("", f"malformed scenario document: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioParseError("", "scenario document must be a mapping")
    return _validate(doc)


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def serialize_scenario(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario.to_dict(), sort_keys=False, default_flow_style=None)


def builtin_scenario_path(name: str = "three_agent_cubic") -> Path:
    """Path of a scenario shipped with the package."""
    return Path(str(resources.files("raid") / "scenarios" / f"{name}.yaml"))
