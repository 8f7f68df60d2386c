"""Decentralized online gradient descent over the ball ``B(0, D)``.

Each agent solves ``argmin_{||u|| <= D} eta <u, g_prev> + 0.5 ||u - half||^2``
in closed form (a gradient step followed by projection), then the actions
are gossip-mixed to form the next ``half`` point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .topology import gossip

__all__ = ["LearnerState", "project_ball", "learner_step", "learner_mix", "restart"]


def project_ball(v, D: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm <= D:
        return v.copy()
    return v * (D / nrm)


@dataclass
class LearnerState:
    """Per-agent mixed actions ``delta_half`` (shape ``(n, d)``), radius and step."""

    delta_half: np.ndarray
    D: float
    eta: float

    def __post_init__(self):
        if self.D <= 0 or self.eta <= 0:
            raise ParameterError(f"need D > 0 and eta > 0, got D={self.D}, eta={self.eta}")
        self.delta_half = np.asarray(self.delta_half, dtype=float)

    @classmethod
    def zeros(cls, n: int, d: int, D: float, eta: float) -> "LearnerState":
        return cls(np.zeros((n, d)), D, eta)


def learner_step(state: LearnerState, i: int, g_prev) -> np.ndarray:
    return project_ball(state.delta_half[i] - state.eta * np.asarray(g_prev, dtype=float), state.D)


def learner_mix(state: LearnerState, M, deltas) -> LearnerState:
    # A convex combination of points in the ball stays in the ball; the clip
    # only absorbs rounding.
    mixed = gossip(M, deltas)
    norms = np.linalg.norm(mixed, axis=1)
    over = norms > state.D
    if np.any(over):
        mixed[over] *= (state.D / norms[over])[:, None]
    state.delta_half = mixed
    return state


def restart(state: LearnerState) -> LearnerState:
    state.delta_half = np.zeros_like(state.delta_half)
    return state
