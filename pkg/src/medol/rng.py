"""Seed derivation for independent random streams.

Every (agent, purpose) pair gets its own Philox generator keyed by a
``SeedSequence`` spawn key, so draws never depend on scheduling order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PURPOSES = {"xi": 0, "s": 1, "z": 2}
RUN_AGENT = 2**32 - 1  # spawn-key slot reserved for run-level streams
RUN_PURPOSES = {"pick": 0, "eval": 1, "init": 2}


def make_generator(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def agent_stream(seed: int, agent: int, purpose: str) -> np.random.Generator:
    return make_generator(seed, agent, PURPOSES[purpose])


def run_stream(seed: int, purpose: str = "pick") -> np.random.Generator:
    return make_generator(seed, RUN_AGENT, RUN_PURPOSES[purpose])


@dataclass
class AgentStreams:
    """Per-agent generators, one list entry per agent for each purpose."""

    xi: list
    s: list
    z: list

    @classmethod
    def from_seed(cls, seed: int, n: int) -> "AgentStreams":
        return cls(
            xi=[agent_stream(seed, i, "xi") for i in range(n)],
            s=[agent_stream(seed, i, "s") for i in range(n)],
            z=[agent_stream(seed, i, "z") for i in range(n)],
        )
