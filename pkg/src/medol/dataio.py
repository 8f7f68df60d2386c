"""Sparse binary-classification datasets: LIBSVM parsing, normalization, splits.

Samples are stored in CSR form. Feature columns are zero-based in memory; the
LIBSVM text format is one-based and the conversion happens at the boundary.
"""

from __future__ import annotations

import gzip
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError, ParseError

__all__ = [
    "Dataset",
    "Partition",
    "parse_libsvm",
    "load_libsvm",
    "to_libsvm",
    "normalize",
    "partition",
    "train_test_split",
    "make_synthetic",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """Binary-labelled sparse samples.

    Attributes:
        indptr, indices, values: CSR arrays; row ``k`` owns
            ``indices[indptr[k]:indptr[k + 1]]`` (zero-based columns).
        labels: ``+1.0`` / ``-1.0`` per sample.
        dim: Number of feature columns.
    """

    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    dim: int

    def __len__(self) -> int:
        return len(self.labels)

    def row(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[k], self.indptr[k + 1]
        return self.indices[lo:hi], self.values[lo:hi]

    @property
    def samples(self) -> list[tuple[dict[int, float], int]]:
        """Samples as ``({column: value}, label)`` pairs."""
        out = []
        for k in range(len(self)):
            idx, val = self.row(k)
            out.append(({int(i): float(v) for i, v in zip(idx, val)}, int(self.labels[k])))
        return out

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.indices, self.indptr), shape=(len(self), self.dim))

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        counts = np.diff(self.indptr)[rows]
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        take = [np.arange(self.indptr[r], self.indptr[r + 1]) for r in rows]
        take = np.concatenate(take) if take else np.zeros(0, dtype=np.int64)
        return Dataset(indptr, self.indices[take], self.values[take], self.labels[rows], self.dim)

    @classmethod
    def from_dense(cls, X, y) -> "Dataset":
        X = np.asarray(X, dtype=float)
        csr = sp.csr_matrix(X)
        csr.eliminate_zeros()
        return cls(
            csr.indptr.astype(np.int64), csr.indices.astype(np.int64), csr.data.astype(float),
            np.asarray(y, dtype=float), X.shape[1],
        )


@dataclass(frozen=True)
class Partition:
    """Equal-size disjoint shards of sample indices, one per agent."""

    shards: list
    n: int
    discarded: int


def _parse_label(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"unparseable label {tok!r}", lineno) from None
    if v == 1.0:
        return 1.0
    if v in (-1.0, 0.0):
        return -1.0
    raise ParseError(f"label {tok!r} is not one of +1, 1, -1, 0", lineno)


def parse_libsvm(data) -> Dataset:
    """Parse LIBSVM text (``"<label> <idx>:<val> ..."`` per line).

    Accepts ``str`` or ``bytes``. Labels ``+1``/``1`` map to +1 and
    ``-1``/``0`` to -1. Blank lines are skipped and ``#`` starts a comment.
    """
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    indptr, indices, values, labels = [0], [], [], []
    dim = 0
    for lineno, line in enumerate(io.StringIO(data), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        labels.append(_parse_label(toks[0], lineno))
        seen = set()
        for tok in toks[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"expected <index>:<value>, got {tok!r}", lineno)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"malformed feature {tok!r}", lineno) from None
            if idx <= 0:
                raise ParseError(f"feature index must be >= 1, got {idx}", lineno)
            if idx in seen:
                raise ParseError(f"duplicate feature index {idx}", lineno)
            if not math.isfinite(val):
                raise ParseError(f"non-finite feature value {val_s!r}", lineno)
            seen.add(idx)
            indices.append(idx - 1)
            values.append(val)
            dim = max(dim, idx)
        indptr.append(len(indices))
    return Dataset(
        np.asarray(indptr, dtype=np.int64),
        np.asarray(indices, dtype=np.int64),
        np.asarray(values, dtype=float),
        np.asarray(labels, dtype=float),
        dim,
    )


def load_libsvm(path) -> Dataset:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return parse_libsvm(fh.read())


def to_libsvm(ds: Dataset) -> str:
    lines = []
    for k in range(len(ds)):
        idx, val = ds.row(k)
        feats = " ".join(f"{int(i) + 1}:{float(v)!r}" for i, v in zip(idx, val))
        label = "+1" if ds.labels[k] > 0 else "-1"
        lines.append(f"{label} {feats}".rstrip())
    return "\n".join(lines) + ("\n" if lines else "")


def normalize(ds: Dataset) -> Dataset:
    """Scale every nonzero sample to unit Euclidean norm."""
    row_of = np.repeat(np.arange(len(ds)), np.diff(ds.indptr))
    norms = np.sqrt(np.bincount(row_of, weights=ds.values**2, minlength=len(ds)))
    scale = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    return Dataset(ds.indptr, ds.indices, ds.values * scale[row_of], ds.labels, ds.dim)


def partition(ds: Dataset, n: int, seed: int) -> Partition:
    """Shuffle sample indices and split them into ``n`` shards of ``m // n``.

    The ``m % n`` leftover samples are dropped so every agent holds exactly the
    same number of samples.
    """
    m = len(ds)
    if n < 1:
        raise ParameterError(f"number of agents must be >= 1, got {n}")
    if m == 0:
        raise ParameterError("cannot partition an empty dataset")
    if n > m:
        raise ParameterError(f"cannot split {m} samples among {n} agents")
    perm = np.random.default_rng(seed).permutation(m)
    size = m // n
    shards = [np.sort(perm[i * size:(i + 1) * size]) for i in range(n)]
    discarded = m - n * size
    if discarded:
        log.info("partition: discarded %d of %d samples", discarded, m)
    return Partition(shards=shards, n=n, discarded=discarded)


def train_test_split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle split with ``floor(m * test_fraction)`` test samples."""
    if not 0.0 < test_fraction < 1.0:
        raise ParameterError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    m = len(ds)
    n_test = int(math.floor(m * test_fraction))
    perm = np.random.default_rng(seed).permutation(m)
    return ds.subset(np.sort(perm[n_test:])), ds.subset(np.sort(perm[:n_test]))


def make_synthetic(
    m: int,
    dim: int,
    seed: int,
    separation: float = 1.5,
    label_noise: float = 0.05,
    density: float = 1.0,
) -> Dataset:
    """Two Gaussian classes in ``dim`` dimensions, unit-normalized.

    Class ``b`` has mean ``b * separation * u`` for a random unit ``u``;
    ``label_noise`` is the probability of flipping a label after sampling.
    ``density < 1`` zeroes features at random to mimic sparse text data.
    """
    if m < 1 or dim < 1:
        raise ParameterError("synthetic dataset needs m >= 1 and dim >= 1")
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    y = np.where(rng.random(m) < 0.5, 1.0, -1.0)
    X = rng.standard_normal((m, dim)) + separation * y[:, None] * u
    if density < 1.0:
        X *= rng.random((m, dim)) < density
    flip = rng.random(m) < label_noise
    y = np.where(flip, -y, y)
    return normalize(Dataset.from_dense(X, y))
