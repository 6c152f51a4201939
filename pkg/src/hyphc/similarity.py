"""Pairwise similarity graphs over latent vectors, and triplet sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

ALL_TRIPLETS_MAX_N = 128


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    """Symmetric similarity matrix with entries in [0, 1] and zero diagonal."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidInputError(f"weights must be square, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidInputError("weights contain non-finite entries")
        if not np.array_equal(w, w.T):
            raise InvalidInputError("weights are not symmetric")
        if np.any(np.diag(w) != 0.0):
            raise InvalidInputError("weights must have a zero diagonal")
        if w.min(initial=0.0) < 0.0 or w.max(initial=0.0) > 1.0:
            raise InvalidInputError("weights must lie in [0, 1]")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges) -> "SimilarityGraph":
        """Build from ``(i, j, w)`` triples; unlisted pairs get weight 0."""
        w = np.zeros((n, n))
        for i, j, val in edges:
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise InvalidInputError(f"bad edge ({i}, {j}) for n={n}")
            w[i, j] = w[j, i] = float(val)
        return cls(w)


def build_similarity(features, kind: str = "cosine", sigma: float = 1.0) -> SimilarityGraph:
    """Similarity graph of the rows of ``features``.

    ``kind="cosine"`` gives ``(1 + cos(z_i, z_j)) / 2``; ``kind="rbf"`` gives
    ``exp(-|z_i - z_j|^2 / (2 sigma^2))``.
    """
    z = np.asarray(features, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 2 or z.shape[1] < 1:
        raise InvalidInputError(f"features must be n x d with n >= 2, d >= 1; got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("features contain non-finite entries")
    if kind == "cosine":
        norms = np.linalg.norm(z, axis=1)
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise InvalidInputError(f"row {zero[0]} has zero norm; cosine similarity undefined")
        u = z / norms[:, None]
        w = 0.5 * (1.0 + u @ u.T)
    elif kind == "rbf":
        if not sigma > 0:
            raise InvalidInputError(f"rbf sigma must be positive, got {sigma}")
        sq = np.sum(z * z, axis=1)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (z @ z.T), 0.0)
        w = np.exp(-d2 / (2.0 * sigma * sigma))
    else:
        raise InvalidInputError(f"unknown similarity kind {kind!r}")
    w = np.clip(0.5 * (w + w.T), 0.0, 1.0)
    np.fill_diagonal(w, 0.0)
    return SimilarityGraph(w)


def n_triplets(n: int) -> int:
    return math.comb(n, 3)


def all_triplets(n: int) -> np.ndarray:
    """Every ``i < j < k`` in lexicographic order, as an ``(C(n,3), 3)`` array."""
    if n < 3:
        raise InvalidInputError(f"need n >= 3 for triplets, got {n}")
    iu, ju = np.triu_indices(n, k=1)
    counts = n - 1 - ju  # choices of k > j for each (i, j)
    starts = np.cumsum(counts) - counts
    i = np.repeat(iu, counts)
    j = np.repeat(ju, counts)
    k = j + 1 + np.arange(counts.sum()) - np.repeat(starts, counts)
    return np.stack([i, j, k], axis=1).astype(np.int64)


def _unrank_colex(ranks: np.ndarray, n: int) -> np.ndarray:
    # rank = C(k,3) + C(j,2) + i  with i < j < k
    ks = np.arange(n, dtype=np.int64)
    c3 = ks * (ks - 1) * (ks - 2) // 6
    c2 = ks * (ks - 1) // 2
    k = np.searchsorted(c3, ranks, side="right") - 1
    rest = ranks - c3[k]
    j = np.searchsorted(c2, rest, side="right") - 1
    i = rest - c2[j]
    return np.stack([i, j, k], axis=1)


def sample_triplets(n: int, mode="all", m: int | None = None, seed: int | None = None,
                    rng: np.random.Generator | None = None) -> np.ndarray:
    """Canonical triplets ``(i, j, k)`` with ``i < j < k``.

    ``mode="all"`` enumerates every triplet. ``mode="uniform"`` draws ``m``
    triplets, without replacement when ``m <= C(n, 3)`` and with replacement
    otherwise, sorted into lexicographic order. Pass either ``seed`` or an
    existing ``rng``.
    """
    if n < 3:
        raise InvalidInputError(f"need n >= 3 for triplets, got {n}")
    if mode == "all":
        return all_triplets(n)
    if mode != "uniform":
        raise InvalidInputError(f"unknown triplet mode {mode!r}")
    if m is None or m < 1:
        raise InvalidInputError(f"uniform sampling needs m >= 1, got {m}")
    if rng is None:
        rng = np.random.default_rng(seed)
    total = n_triplets(n)
    ranks = rng.choice(total, size=m, replace=m > total)
    trip = _unrank_colex(np.sort(ranks).astype(np.int64), n)
    order = np.lexsort((trip[:, 2], trip[:, 1], trip[:, 0]))
    return np.ascontiguousarray(trip[order])


def default_triplet_budget(n: int) -> int | None:
    """``None`` (use all triplets) for ``n <= 128``, else ``20 n log2 n``."""
    if n <= ALL_TRIPLETS_MAX_N:
        return None
    return int(math.ceil(20 * n * math.log2(n)))
