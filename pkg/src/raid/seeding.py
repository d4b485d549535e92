"""Seed splitting.

A run is identified by a single non-negative 64-bit *run seed*. Each agent
of a run owns two independent streams derived from it::

    probe stream  = PCG64(SeedSequence(run_seed, spawn_key=(agent, 0)))
    noise stream  = PCG64(SeedSequence(run_seed, spawn_key=(agent, 1)))

so changing the noise law never perturbs the probing sequence. A base seed
plus run index yields run seeds through :func:`split_seed`::

    run_seed(base, k) = SeedSequence(base, spawn_key=(k,)).generate_state(1, uint64)[0]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROBE_STREAM = 0
NOISE_STREAM = 1
_MAX_SEED = 2**64 - 1


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= _MAX_SEED:
        raise ValueError(f"seed must be a non-negative 64-bit integer, got {seed}")
    return seed


def split_seed(base: int, index: int) -> int:
    """Run seed number ``index`` derived from ``base``."""
    ss = np.random.SeedSequence(_check_seed(base), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def run_seeds(base: int, count: int) -> list[int]:
    return [split_seed(base, k) for k in range(count)]


def stream(run_seed: int, agent: int, kind: int) -> np.random.Generator:
    ss = np.random.SeedSequence(_check_seed(run_seed), spawn_key=(int(agent), int(kind)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class AgentStreams:
    probe: np.random.Generator
    noise: np.random.Generator


def agent_streams(run_seed: int, agent: int) -> AgentStreams:
    return AgentStreams(
        probe=stream(run_seed, agent, PROBE_STREAM),
        noise=stream(run_seed, agent, NOISE_STREAM),
    )
