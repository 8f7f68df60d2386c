"""Local stochastic objectives ``F^i(x, xi)`` and the global average.

A sample index ``xi`` is either an int or an int array (a minibatch, whose
values and subgradients are averaged). Objectives are immutable; all
randomness in ``xi`` comes from the caller's generator via :meth:`draw`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import Dataset, Partition
from .errors import ParameterError

__all__ = [
    "LocalObjective",
    "CappedL1SVM",
    "L1Norm",
    "NoisyQuadratic",
    "ObjectiveSuite",
    "capped_l1_svm",
    "l1_norm_objective",
    "noisy_quadratic",
    "svm_suite",
    "test_accuracy",
]


class LocalObjective:
    """Interface for one agent's stochastic objective.

    Subclasses set ``dim``, ``lipschitz`` and ``sample_count`` and implement
    ``value``, ``subgradient``, ``full_value`` and ``full_subgradient``.
    """

    dim: int
    lipschitz: float
    sample_count: int

    def value(self, x, xi) -> float:
        raise NotImplementedError

    def subgradient(self, x, xi) -> np.ndarray:
        raise NotImplementedError

    def full_value(self, x) -> float:
        raise NotImplementedError

    def full_subgradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def full_subgradient_many(self, X) -> np.ndarray:
        return np.array([self.full_subgradient(x) for x in np.atleast_2d(X)])

    def draw(self, rng, batch: int = 1):
        """Draw a uniformly random sample index (or ``batch`` of them)."""
        if batch == 1:
            return int(rng.integers(self.sample_count))
        return rng.integers(self.sample_count, size=batch)

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ParameterError(f"expected a vector of dimension {self.dim}, got shape {x.shape}")
        return x


class CappedL1SVM(LocalObjective):
    """Hinge loss plus capped-l1 penalty ``lam * sum_j min(|x_j|, alpha)``.

    Per-sample value: ``max(1 - b <a, x>, 0) + penalty(x)``; the full value
    averages the hinge over the shard and adds the penalty once.
    Subgradient elements at kinks (margin exactly 1, ``x_j = 0`` and
    ``|x_j| = alpha``) are taken to be zero.
    """

    def __init__(self, shard: Dataset, lam: float, alpha: float):
        if len(shard) == 0:
            raise ParameterError("capped-l1 SVM needs a nonempty shard")
        if lam < 0 or alpha <= 0:
            raise ParameterError(f"need lam >= 0 and alpha > 0, got lam={lam}, alpha={alpha}")
        self.data = shard
        self.lam = float(lam)
        self.alpha = float(alpha)
        self.dim = shard.dim
        self.sample_count = len(shard)
        self._A = shard.to_csr()
        self._b = shard.labels
        row_norms = np.sqrt(np.asarray(self._A.multiply(self._A).sum(axis=1)).ravel())
        self.lipschitz = float(row_norms.max() + self.lam * np.sqrt(self.dim))

    def penalty(self, x) -> float:
        return self.lam * float(np.minimum(np.abs(x), self.alpha).sum())

    def penalty_grad(self, x) -> np.ndarray:
        ax = np.abs(x)
        return self.lam * np.sign(x) * ((ax > 0) & (ax < self.alpha))

    def _margin(self, x, k) -> float:
        idx, val = self.data.row(k)
        return self._b[k] * float(val @ x[idx])

    def value(self, x, xi) -> float:
        x = self._check(x)
        ks = np.atleast_1d(xi)
        hinge = sum(max(1.0 - self._margin(x, int(k)), 0.0) for k in ks) / len(ks)
        return hinge + self.penalty(x)

    def subgradient(self, x, xi) -> np.ndarray:
        x = self._check(x)
        ks = np.atleast_1d(xi)
        g = np.zeros(self.dim)
        for k in ks:
            k = int(k)
            if self._margin(x, k) < 1.0:
                idx, val = self.data.row(k)
                g[idx] -= self._b[k] * val
        if len(ks) > 1:
            g /= len(ks)
        return g + self.penalty_grad(x)

    def full_value(self, x) -> float:
        x = self._check(x)
        margins = self._b * (self._A @ x)
        return float(np.maximum(1.0 - margins, 0.0).mean()) + self.penalty(x)

    def full_subgradient(self, x) -> np.ndarray:
        x = self._check(x)
        active = (self._b * (self._A @ x)) < 1.0
        return -(self._A.T @ (self._b * active)) / self.sample_count + self.penalty_grad(x)

    def full_subgradient_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        margins = self._b[:, None] * np.asarray(self._A @ X.T)
        weights = self._b[:, None] * (margins < 1.0)
        hinge = -np.asarray(self._A.T @ weights).T / self.sample_count
        ax = np.abs(X)
        return hinge + self.lam * np.sign(X) * ((ax > 0) & (ax < self.alpha))


class L1Norm(LocalObjective):
    """Deterministic ``scale * ||x||_1``; ``xi`` is ignored."""

    sample_count = 1

    def __init__(self, dim: int, scale: float = 1.0):
        if dim < 1:
            raise ParameterError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self.scale = float(scale)
        # Euclidean Lipschitz constant of the l1 norm is sqrt(dim).
        self.lipschitz = abs(self.scale) * np.sqrt(dim)

    def value(self, x, xi=0) -> float:
        return self.scale * float(np.abs(self._check(x)).sum())

    def subgradient(self, x, xi=0) -> np.ndarray:
        return self.scale * np.sign(self._check(x))

    def full_value(self, x) -> float:
        return self.value(x)

    def full_subgradient(self, x) -> np.ndarray:
        return self.subgradient(x)

    def full_subgradient_many(self, X) -> np.ndarray:
        return self.scale * np.sign(np.atleast_2d(np.asarray(X, dtype=float)))

    def draw(self, rng, batch: int = 1):
        return 0


class NoisyQuadratic(LocalObjective):
    """``0.5 ||x - x_star||^2`` with a Gaussian gradient perturbation per ``xi``.

    ``F(x, xi) = 0.5 ||x - x_star||^2 + <noise(xi), x - x_star>`` so that the
    stochastic gradient is ``x - x_star + noise(xi)``, unbiased with
    per-coordinate standard deviation ``sigma``. ``noise(xi)`` is a pure
    function of ``(seed, xi)``.
    """

    sample_count = 2**62
    lipschitz = float("inf")
    smoothness = 1.0

    def __init__(self, dim: int, x_star, sigma: float = 0.0, seed: int = 0):
        x_star = np.asarray(x_star, dtype=float)
        if x_star.shape != (dim,):
            raise ParameterError(f"x_star must have shape ({dim},), got {x_star.shape}")
        if sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {sigma}")
        self.dim = dim
        self.x_star = x_star
        self.sigma = float(sigma)
        self.seed = int(seed)

    def noise(self, xi) -> np.ndarray:
        if self.sigma == 0.0:
            return np.zeros(self.dim)
        ks = np.atleast_1d(xi)
        total = np.zeros(self.dim)
        for k in ks:
            total += np.random.default_rng((self.seed, int(k))).standard_normal(self.dim)
        return self.sigma * total / len(ks)

    def value(self, x, xi) -> float:
        r = self._check(x) - self.x_star
        return 0.5 * float(r @ r) + float(self.noise(xi) @ r)

    def subgradient(self, x, xi) -> np.ndarray:
        return self._check(x) - self.x_star + self.noise(xi)

    def full_value(self, x) -> float:
        r = self._check(x) - self.x_star
        return 0.5 * float(r @ r)

    def full_subgradient(self, x) -> np.ndarray:
        return self._check(x) - self.x_star

    def full_subgradient_many(self, X) -> np.ndarray:
        return np.atleast_2d(np.asarray(X, dtype=float)) - self.x_star


def capped_l1_svm(shard: Dataset, lam: float, alpha: float) -> CappedL1SVM:
    return CappedL1SVM(shard, lam, alpha)


def l1_norm_objective(dim: int, scale: float = 1.0) -> L1Norm:
    return L1Norm(dim, scale)


def noisy_quadratic(dim: int, x_star, sigma: float = 0.0, seed: int = 0) -> NoisyQuadratic:
    return NoisyQuadratic(dim, x_star, sigma, seed)


@dataclass(frozen=True)
class ObjectiveSuite:
    """The ``n`` local objectives and the global average ``f = mean_i f^i``."""

    locals: tuple
    dim: int
    lipschitz: float

    def __post_init__(self):
        if not self.locals:
            raise ParameterError("an objective suite needs at least one local objective")
        dims = {F.dim for F in self.locals}
        if dims != {self.dim}:
            raise ParameterError(f"local objectives disagree on dimension: {sorted(dims)} vs {self.dim}")

    @classmethod
    def of(cls, locals_) -> "ObjectiveSuite":
        locals_ = tuple(locals_)
        if not locals_:
            raise ParameterError("an objective suite needs at least one local objective")
        return cls(locals_, locals_[0].dim, max(F.lipschitz for F in locals_))

    @property
    def n(self) -> int:
        return len(self.locals)

    def global_value(self, x) -> float:
        return sum(F.full_value(x) for F in self.locals) / self.n

    def global_subgradient(self, x) -> np.ndarray:
        g = np.zeros(self.dim)
        for F in self.locals:
            g += F.full_subgradient(x)
        return g / self.n

    def global_subgradient_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        G = np.zeros_like(X)
        for F in self.locals:
            G += F.full_subgradient_many(X)
        return G / self.n


def svm_suite(ds: Dataset, part: Partition, lam: float | None = None, alpha: float = 2.0) -> ObjectiveSuite:
    """Capped-l1 SVM on each agent's shard; ``lam`` defaults to ``1e-5 / n``."""
    if lam is None:
        lam = 1e-5 / part.n
    return ObjectiveSuite.of(capped_l1_svm(ds.subset(s), lam, alpha) for s in part.shards)


def test_accuracy(x, ds: Dataset) -> float:
    """Fraction of samples with ``sign(<a, x>) == b``; a zero score counts as +1."""
    if len(ds) == 0:
        raise ParameterError("accuracy needs a nonempty dataset")
    scores = ds.to_csr() @ np.asarray(x, dtype=float)
    pred = np.where(scores >= 0, 1.0, -1.0)
    return float(np.mean(pred == ds.labels))


test_accuracy.__test__ = False  # keep pytest from collecting it
