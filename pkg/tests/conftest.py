from __future__ import annotations

import pytest

from raid.agents import AgentSpec, NoiseSpec
from raid.polybasis import CurvatureBounds, StrategyInterval
from raid.scenario import builtin_scenario_path, load_scenario

UNIT = StrategyInterval(-1.0, 1.0)
GAUSS = NoiseSpec("gaussian", 0.1)


def cubic_agents(noise: NoiseSpec = GAUSS) -> list[AgentSpec]:
    return [
        AgentSpec((1.0, 0.5, 0.0), UNIT, CurvatureBounds(1.0, 1.0), noise),
        AgentSpec((0.0, 3.5, 1.0), UNIT, CurvatureBounds(1.0, 13.0), noise),
        AgentSpec((-1.0, 3.5, -1.0), UNIT, CurvatureBounds(1.0, 13.0), noise),
    ]


@pytest.fixture
def agents() -> list[AgentSpec]:
    return cubic_agents()


@pytest.fixture
def agent1(agents) -> AgentSpec:
    return agents[0]


@pytest.fixture
def agent2(agents) -> AgentSpec:
    return agents[1]


@pytest.fixture(scope="session")
def scenario():
    return load_scenario(builtin_scenario_path())


@pytest.fixture(scope="session")
def scenario_path():
    return builtin_scenario_path()


def pytest_terminal_summary(terminalreporter):
    from _support import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
