"""Randomized smoothing: ball/sphere samplers and gradient estimators.

``f_delta(x) = E[f(x + delta * u)]`` with ``u`` uniform on the unit ball. The
first-order estimator evaluates a stochastic subgradient at a perturbed point;
the zero-order estimator uses two function values along a random sphere
direction with a shared sample index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .objectives import LocalObjective, ObjectiveSuite

__all__ = [
    "GradientSample",
    "sample_unit_ball",
    "sample_unit_sphere",
    "first_order_gradient",
    "zero_order_gradient",
    "smoothed_value_mc",
    "smoothed_gradient_mc",
]


@dataclass(frozen=True)
class GradientSample:
    g: np.ndarray
    kind: str
    delta_prime: float
    xi: object
    z: np.ndarray | None = None


def sample_unit_sphere(d: int, rng) -> np.ndarray:
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    while True:
        v = rng.standard_normal(d)
        nrm = np.linalg.norm(v)
        if nrm > 0:
            return v / nrm


def sample_unit_ball(d: int, rng) -> np.ndarray:
    """Uniform draw from the unit ball: sphere direction times ``U ** (1/d)``."""
    v = sample_unit_sphere(d, rng)
    return v * rng.random() ** (1.0 / d)


def first_order_gradient(F: LocalObjective, x, delta_prime: float, xi, rng) -> GradientSample:
    """Stochastic subgradient at ``x + delta_prime * z``, ``z`` uniform in the ball.

    With ``delta_prime == 0`` no direction is drawn and this is the plain
    stochastic subgradient at ``x``.
    """
    if delta_prime < 0:
        raise ParameterError(f"delta_prime must be >= 0, got {delta_prime}")
    x = np.asarray(x, dtype=float)
    if delta_prime == 0:
        return GradientSample(F.subgradient(x, xi), "first", 0.0, xi)
    z = sample_unit_ball(F.dim, rng)
    return GradientSample(F.subgradient(x + delta_prime * z, xi), "first", delta_prime, xi, z)


def zero_order_gradient(F: LocalObjective, x, delta_prime: float, xi, rng) -> GradientSample:
    """Two-point estimate ``d / (2 dp) * (F(x + dp z) - F(x - dp z)) * z``."""
    if not delta_prime > 0:
        raise ParameterError(f"zero-order estimator needs delta_prime > 0, got {delta_prime}")
    x = np.asarray(x, dtype=float)
    d = F.dim
    z = sample_unit_sphere(d, rng)
    diff = F.value(x + delta_prime * z, xi) - F.value(x - delta_prime * z, xi)
    return GradientSample(d / (2.0 * delta_prime) * diff * z, "zero", delta_prime, xi, z)


def smoothed_value_mc(f, x, delta: float, samples: int, rng) -> tuple[float, float]:
    """Monte-Carlo estimate of ``f_delta(x)`` and its standard error.

    ``f`` is any callable returning a float.
    """
    if samples < 1:
        raise ParameterError(f"samples must be >= 1, got {samples}")
    x = np.asarray(x, dtype=float)
    if delta == 0:
        return float(f(x)), 0.0
    d = x.shape[0]
    vals = np.array([f(x + delta * sample_unit_ball(d, rng)) for _ in range(samples)])
    se = float(vals.std(ddof=1) / np.sqrt(samples)) if samples > 1 else float("inf")
    return float(vals.mean()), se


def _draw_local(target, rng):
    if isinstance(target, ObjectiveSuite):
        return target.locals[int(rng.integers(target.n))]
    return target


def smoothed_gradient_mc(target, x, delta: float, samples: int, rng, mode: str = "first",
                         full_batch: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo estimate of ``grad f_delta(x)`` with per-coordinate standard errors.

    ``target`` is a :class:`LocalObjective` or an :class:`ObjectiveSuite`; for a
    suite every draw picks an agent uniformly and then a fresh sample index.
    With ``full_batch`` (first-order only) the exact full subgradient is taken
    at each perturbed point, leaving only the smoothing randomness.
    """
    if samples < 1:
        raise ParameterError(f"samples must be >= 1, got {samples}")
    if mode not in ("first", "zero"):
        raise ParameterError(f"mode must be 'first' or 'zero', got {mode!r}")
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    if full_batch:
        if mode != "first":
            raise ParameterError("full_batch evaluation is only defined for mode='first'")
        if delta == 0:
            G = np.atleast_2d(_full_subgradient_many(target, x[None, :]))
        else:
            pts = x + delta * np.array([sample_unit_ball(d, rng) for _ in range(samples)])
            G = _full_subgradient_many(target, pts)
    else:
        G = np.empty((samples, d))
        for k in range(samples):
            F = _draw_local(target, rng)
            xi = F.draw(rng)
            if mode == "first":
                G[k] = first_order_gradient(F, x, delta, xi, rng).g
            else:
                G[k] = zero_order_gradient(F, x, delta, xi, rng).g
    if G.shape[0] == 1:
        return G[0], np.zeros(d)
    return G.mean(axis=0), G.std(axis=0, ddof=1) / np.sqrt(G.shape[0])


def _full_subgradient_many(target, X):
    if isinstance(target, ObjectiveSuite):
        return target.global_subgradient_many(X)
    return target.full_subgradient_many(X)
