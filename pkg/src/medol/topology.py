"""Doubly stochastic communication matrices and one-step gossip mixing.

Matrices are built for a fixed, undirected, connected network. ``rho`` is the
second-largest singular value of the weight matrix; ``1 - rho`` is the
spectral gap that governs how fast gossip drives agents to consensus.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConstructionError, ParameterError

__all__ = [
    "CommMatrix",
    "ring_matrix",
    "erdos_renyi_matrix",
    "uniform_matrix",
    "second_largest_singular_value",
    "validate",
    "gossip",
    "format_matrix",
    "parse_matrix",
    "save_matrix",
    "load_matrix",
]

log = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
SYMMETRY_TOL = 1e-12
MAX_ER_ATTEMPTS = 100


@dataclass(frozen=True)
class CommMatrix:
    """Symmetric doubly stochastic mixing matrix with its cached ``rho``.

    Attributes:
        n: Number of agents.
        weights: ``(n, n)`` read-only array.
        rho: Second-largest singular value of ``weights``.
        info: Construction metadata (kind, parameters, seed actually used).
    """

    n: int
    weights: np.ndarray
    rho: float
    info: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_weights(cls, weights, info=None, check=True) -> "CommMatrix":
        W = np.array(weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ParameterError(f"weights must be square, got shape {W.shape}")
        if check:
            problems = validate(W)
            if problems:
                raise ParameterError(f"invalid communication matrix: {', '.join(problems)}")
        W.setflags(write=False)
        return cls(n=W.shape[0], weights=W, rho=second_largest_singular_value(W), info=dict(info or {}))

    def neighbors(self, i: int) -> list[int]:
        return [j for j in range(self.n) if j != i and self.weights[i, j] > 0]


def second_largest_singular_value(M) -> float:
    """Second-largest singular value of a symmetric matrix.

    For symmetric input the singular values are the absolute eigenvalues, so a
    symmetric eigensolver is used.
    """
    W = np.asarray(M.weights if isinstance(M, CommMatrix) else M, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ParameterError(f"matrix must be square, got shape {W.shape}")
    if not np.allclose(W, W.T, rtol=0.0, atol=SYMMETRY_TOL):
        raise ParameterError("matrix must be symmetric")
    if W.shape[0] < 2:
        return 0.0
    sv = np.sort(np.abs(np.linalg.eigvalsh(W)))[::-1]
    return float(sv[1])


def _is_connected(W: np.ndarray) -> bool:
    n = W.shape[0]
    if n == 0:
        return False
    seen = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.nonzero(W[i])[0]:
            j = int(j)
            if j != i and j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == n


def validate(M) -> list[str]:
    """Check the mixing-matrix assumptions and return every violation found.

    Possible entries: ``"shape"``, ``"symmetry"``, ``"nonnegativity"``,
    ``"row-sum"``, ``"connectivity"``, ``"rho<1"``. An empty list means ok.
    """
    W = np.asarray(M.weights if isinstance(M, CommMatrix) else M, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] == 0:
        return ["shape"]
    problems = []
    symmetric = np.allclose(W, W.T, rtol=0.0, atol=SYMMETRY_TOL)
    if not symmetric:
        problems.append("symmetry")
    if np.any(W < 0):
        problems.append("nonnegativity")
    if np.any(np.abs(W.sum(axis=1) - 1.0) > ROW_SUM_TOL):
        problems.append("row-sum")
    if not _is_connected(W):
        problems.append("connectivity")
    if symmetric:
        if second_largest_singular_value(W) >= 1.0 - 1e-12:
            problems.append("rho<1")
    else:
        sv = np.linalg.svd(W, compute_uv=False)
        if len(sv) > 1 and sv[1] >= 1.0 - 1e-12:
            problems.append("rho<1")
    return problems


def ring_matrix(n: int, m: int) -> CommMatrix:
    """Circulant ring where each agent averages uniformly over ``m`` agents.

    ``m`` counts the agent itself plus ``(m - 1) / 2`` neighbors on each side.

    >>> round(ring_matrix(20, 7).rho, 3)
    0.814
    """
    if n < 2:
        raise ParameterError(f"ring requires n >= 2, got {n}")
    if m < 1 or m % 2 == 0:
        raise ParameterError(f"ring neighborhood size m must be odd and >= 1, got {m}")
    if m > n:
        raise ParameterError(f"ring neighborhood size m={m} exceeds n={n}")
    W = np.zeros((n, n))
    half = (m - 1) // 2
    for i in range(n):
        for off in range(-half, half + 1):
            W[i, (i + off) % n] = 1.0 / m
    return CommMatrix.from_weights(W, info={"kind": "ring", "n": n, "m": m})


def uniform_matrix(n: int) -> CommMatrix:
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    return CommMatrix.from_weights(np.full((n, n), 1.0 / n), info={"kind": "uniform", "n": n})


def _metropolis(adj: np.ndarray) -> np.ndarray:
    n = adj.shape[0]
    deg = adj.sum(axis=1)
    W = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if adj[i, j]:
                W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for i in range(n):
        W[i, i] = 1.0 - (W[i].sum() - W[i, i])
    return W


def erdos_renyi_matrix(n: int, p: float, seed: int, max_attempts: int = MAX_ER_ATTEMPTS) -> CommMatrix:
    """Metropolis-weighted matrix on a sampled G(n, p) graph.

    Disconnected samples are redrawn with ``seed + 1``, ``seed + 2``, ... up to
    ``max_attempts`` draws.
    """
    if n < 2:
        raise ParameterError(f"Erdos-Renyi graph requires n >= 2, got {n}")
    if not 0.0 < p <= 1.0:
        raise ParameterError(f"edge probability must lie in (0, 1], got {p}")
    iu = np.triu_indices(n, k=1)
    for attempt in range(max_attempts):
        rng = np.random.default_rng(seed + attempt)
        adj = np.zeros((n, n), dtype=bool)
        adj[iu] = rng.random(len(iu[0])) < p
        adj |= adj.T
        if _is_connected(adj.astype(float)):
            info = {"kind": "erdos", "n": n, "p": p, "seed": seed,
                    "seed_used": seed + attempt, "attempts": attempt + 1}
            if attempt:
                log.info("G(%d, %g): connected sample after %d attempts", n, p, attempt + 1)
            return CommMatrix.from_weights(_metropolis(adj), info=info)
    raise ConstructionError(
        f"G({n}, {p}) stayed disconnected after {max_attempts} attempts from seed {seed}",
        attempts=max_attempts,
    )


def gossip(M, vectors) -> np.ndarray:
    """One mixing step: ``out[i] = sum_j W[i, j] * vectors[j]``.

    The sum runs over ``j`` in index order with elementwise operations, so
    the result does not depend on BLAS threading.
    """
    W = M.weights if isinstance(M, CommMatrix) else np.asarray(M, dtype=float)
    V = np.asarray(vectors, dtype=float)
    squeeze = V.ndim == 1
    if squeeze:
        V = V[:, None]
    if V.ndim != 2 or V.shape[0] != W.shape[0]:
        raise ParameterError(f"expected {W.shape[0]} vectors, got array of shape {np.shape(vectors)}")
    out = np.zeros_like(V)
    for j in range(W.shape[0]):
        out += W[:, j:j + 1] * V[j]
    return out[:, 0] if squeeze else out


def format_matrix(M) -> str:
    W = np.asarray(M.weights if isinstance(M, CommMatrix) else M, dtype=float)
    lines = [str(W.shape[0])]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in W]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str, check: bool = True) -> CommMatrix:
    rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    if not rows:
        raise ParameterError("empty matrix text")
    try:
        n = int(rows[0][0])
        W = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise ParameterError(f"malformed matrix text: {exc}") from None
    if W.shape != (n, n):
        raise ParameterError(f"header says n={n} but found matrix of shape {W.shape}")
    return CommMatrix.from_weights(W, info={"kind": "file"}, check=check)


def save_matrix(M: CommMatrix, path) -> None:
    Path(path).write_text(format_matrix(M))


def load_matrix(path) -> CommMatrix:
    return parse_matrix(Path(path).read_text())
