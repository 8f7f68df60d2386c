"""Stationarity metrics for candidate points.

The Goldstein norm ``min{||g|| : g in conv(subgradients over B(x, delta))}``
is not computable in general. Two sampled upper-bound estimates are offered:
the norm of the smoothed gradient at radius ``delta / 2`` (a single element
of the Goldstein set) and the min-norm point of the hull of subgradients
sampled in the ball.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .objectives import ObjectiveSuite, test_accuracy
from .rng import make_generator
from .smoothing import sample_unit_ball, smoothed_gradient_mc

__all__ = [
    "StationarityReport",
    "EvalConfig",
    "full_gradient_norm",
    "goldstein_proxy",
    "goldstein_min_norm",
    "min_norm_point",
    "project_simplex",
    "evaluate_run",
]


@dataclass(frozen=True)
class StationarityReport:
    grad_norm: float
    smoothed_grad_norm: float
    smoothed_grad_std_error: float
    goldstein_estimate: float
    delta: float
    samples_used: int
    test_acc: float | None = None

    def to_dict(self) -> dict:
        return {
            "grad_norm": self.grad_norm,
            "smoothed_grad_norm": self.smoothed_grad_norm,
            "smoothed_grad_std_error": self.smoothed_grad_std_error,
            "goldstein_estimate": self.goldstein_estimate,
            "delta": self.delta,
            "samples_used": self.samples_used,
            "test_acc": self.test_acc,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class EvalConfig:
    samples: int = 1000
    k_samples: int = 64
    seed: int = 0
    mode: str = "first"
    a: float = 0.5
    full_batch: bool = True


def full_gradient_norm(suite: ObjectiveSuite, x) -> float:
    return float(np.linalg.norm(suite.global_subgradient(np.asarray(x, dtype=float))))


def goldstein_proxy(suite, x, delta: float, samples: int, rng, mode: str = "first",
                    a: float = 0.5, full_batch: bool = False) -> tuple[float, float]:
    """Norm of the Monte-Carlo smoothed gradient at radius ``a * delta``.

    Returns ``(estimate, std_error)``, where ``std_error`` is the root sum of
    squared coordinate errors, which bounds the RMS error of the norm.
    """
    if not delta > 0:
        raise ParameterError(f"delta must be > 0, got {delta}")
    if samples < 100:
        raise ParameterError(f"goldstein_proxy needs samples >= 100, got {samples}")
    if not 0 < a < 1:
        raise ParameterError(f"a must lie in (0, 1), got {a}")
    mean, se = smoothed_gradient_mc(suite, x, a * delta, samples, rng, mode=mode, full_batch=full_batch)
    return float(np.linalg.norm(mean)), float(np.sqrt(np.sum(se**2)))


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, len(v) + 1)
    r = ind[u - css / ind > 0][-1]
    theta = css[r - 1] / r
    return np.maximum(v - theta, 0.0)


def min_norm_point(G, tol: float = 1e-8, max_iter: int = 100_000) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-norm point of ``conv(rows of G)``.

    Accelerated projected gradient on ``0.5 ||G^T lam||^2`` over the simplex,
    stopped once the Frank-Wolfe duality gap drops below ``tol``. Returns
    ``(point, weights)``.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    k = G.shape[0]
    if k == 1:
        return G[0].copy(), np.ones(1)
    Q = G @ G.T
    L = max(np.linalg.eigvalsh(Q)[-1], 1e-300)
    lam = np.full(k, 1.0 / k)
    z, tk = lam.copy(), 1.0
    for _ in range(max_iter):
        grad = Q @ lam
        gap = float(lam @ grad - grad.min())
        if gap <= tol:
            break
        lam_next = project_simplex(z - (Q @ z) / L)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        z = lam_next + ((tk - 1.0) / t_next) * (lam_next - lam)
        # restart momentum when the objective goes up
        if lam_next @ Q @ lam_next > lam @ Q @ lam:
            z, t_next = lam_next.copy(), 1.0
        lam, tk = lam_next, t_next
    return G.T @ lam, lam


def goldstein_min_norm(suite, x, delta: float, k_samples: int, rng) -> float:
    """Min-norm point of full subgradients at ``k_samples`` uniform points in ``B(x, delta)``.

    A sampled upper bound on the Goldstein norm; it can only decrease as more
    points are added.
    """
    if k_samples < 1:
        raise ParameterError(f"k_samples must be >= 1, got {k_samples}")
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    pts = x + delta * np.array([sample_unit_ball(d, rng) for _ in range(k_samples)])
    if isinstance(suite, ObjectiveSuite):
        G = suite.global_subgradient_many(pts)
    else:
        G = suite.full_subgradient_many(pts)
    point, _ = min_norm_point(G)
    return float(np.linalg.norm(point))


def evaluate_run(result, suite: ObjectiveSuite, delta: float, eval_config: EvalConfig | None = None,
                 test_set=None) -> tuple[list, dict]:
    """One report per candidate plus the mean of each metric over candidates.

    Each candidate gets its own generator derived from ``eval_config.seed`` so
    the reports do not depend on evaluation order.
    """
    cfg = eval_config or EvalConfig()
    if not delta > 0:
        raise ParameterError(f"delta must be > 0, got {delta}")
    cands = np.atleast_2d(np.asarray(result.candidates if hasattr(result, "candidates") else result))
    if cands.shape[0] == 0:
        raise ParameterError("no candidates to evaluate")
    reports = []
    for k, w in enumerate(cands):
        rng = make_generator(cfg.seed, k, 0)
        est, se = goldstein_proxy(suite, w, delta, cfg.samples, rng, mode=cfg.mode, a=cfg.a,
                                  full_batch=cfg.full_batch and cfg.mode == "first")
        gmin = goldstein_min_norm(suite, w, delta, cfg.k_samples, make_generator(cfg.seed, k, 1))
        acc = test_accuracy(w, test_set) if test_set is not None and len(test_set) else None
        reports.append(StationarityReport(full_gradient_norm(suite, w), est, se, gmin, delta,
                                          cfg.samples + cfg.k_samples, acc))
    keys = ["grad_norm", "smoothed_grad_norm", "smoothed_grad_std_error", "goldstein_estimate"]
    summary = {key: float(np.mean([getattr(r, key) for r in reports])) for key in keys}
    summary["test_acc"] = (float(np.mean([r.test_acc for r in reports]))
                           if reports[0].test_acc is not None else None)
    summary["candidates"] = len(reports)
    summary["delta"] = delta
    return reports, summary
