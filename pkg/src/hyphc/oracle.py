"""Brute-force references for tests and ``eval --oracle``.

Everything here is deliberately naive and shares no code paths with the
implementations it checks.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidInputError
from .similarity import SimilarityGraph
from .tree import Dendrogram

MAX_EXHAUSTIVE_N = 8


def double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def _insertions(tree, leaf):
    # attach `leaf` above every node of `tree` (including above the root)
    yield (tree, leaf)
    if isinstance(tree, tuple):
        left, right = tree
        for sub in _insertions(left, leaf):
            yield (sub, right)
        for sub in _insertions(right, leaf):
            yield (left, sub)


def enumerate_trees(n: int):
    """Yield every rooted binary tree on leaves ``0..n-1`` as nested tuples.

    Leaf ``k`` is inserted on every edge of each tree over ``0..k-1``, which
    produces each of the ``(2n-3)!!`` trees exactly once.
    """
    if n < 2:
        raise InvalidInputError("need at least 2 leaves")
    trees = [(0, 1)]
    for leaf in range(2, n):
        trees = [t for base in trees for t in _insertions(base, leaf)]
    yield from trees


def _nested_cost(tree, w):
    """Returns ``(leaves, cost)`` for a nested-tuple tree."""
    if not isinstance(tree, tuple):
        return [tree], 0.0
    left, cl = _nested_cost(tree[0], w)
    right, cr = _nested_cost(tree[1], w)
    size = len(left) + len(right)
    cross = sum(w[a][b] for a in left for b in right)
    return left + right, cl + cr + size * cross


def best_tree_exhaustive(graph: SimilarityGraph):
    """Minimum-Dasgupta-cost tree by full enumeration, for ``2 <= n <= 8``."""
    n = graph.n
    if n > MAX_EXHAUSTIVE_N:
        raise InvalidInputError(f"exhaustive search refused for n={n} > {MAX_EXHAUSTIVE_N}")
    w = graph.weights.tolist()
    best, best_cost = None, math.inf
    for tree in enumerate_trees(n):
        cost = _nested_cost(tree, w)[1]
        if cost < best_cost:
            best, best_cost = tree, cost
    return Dendrogram.from_nested(best), best_cost


def dasgupta_cost_naive(tree: Dendrogram, graph: SimilarityGraph) -> float:
    """Per-pair lca by walking parent pointers, leaf counts by brute force."""
    n = tree.n_leaves
    parent = [-1] * (2 * n - 1)
    kids = {}
    for k, (a, b) in enumerate(tree.children):
        parent[a] = parent[b] = n + k
        kids[n + k] = (int(a), int(b))

    def n_leaves_under(node):
        if node < n:
            return 1
        return sum(n_leaves_under(c) for c in kids[node])

    total = 0.0
    for u in range(n):
        ancestors = set()
        a = u
        while a != -1:
            ancestors.add(a)
            a = parent[a]
        for v in range(u + 1, n):
            a = v
            while a not in ancestors:
                a = parent[a]
            total += graph.weights[u, v] * n_leaves_under(a)
    return total


def finite_diff(f, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at array ``x`` (any shape)."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(a, b, floor: float = 1e-8) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor))


# ---------------------------------------------------------------------------
# scalar re-implementations
# ---------------------------------------------------------------------------


def _mobius_add(x, y):
    xy = x[0] * y[0] + x[1] * y[1]
    x2 = x[0] ** 2 + x[1] ** 2
    y2 = y[0] ** 2 + y[1] ** 2
    den = 1 + 2 * xy + x2 * y2
    a = (1 + 2 * xy + y2) / den
    b = (1 - x2) / den
    return (a * x[0] + b * y[0], a * x[1] + b * y[1])


def lca_depth_scan(x, y, samples: int = 1_000_000) -> float:
    """Minimum origin distance over a dense scan of the geodesic ``x -> y``.

    The geodesic is ``gamma(t) = x (+) tanh(t artanh|v|) v/|v|`` with
    ``v = (-x) (+) y`` in Mobius arithmetic, ``t`` in ``[0, 1]``.
    """
    x = np.asarray(x, dtype=np.float64)
    v = np.array(_mobius_add(-x, np.asarray(y, dtype=np.float64)))
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 2.0 * math.atanh(float(np.linalg.norm(x)))
    t = np.linspace(0.0, 1.0, samples)
    step = np.tanh(t * math.atanh(nv))[:, None] * (v / nv)[None, :]
    px, py = _mobius_add((x[0], x[1]), (step[:, 0], step[:, 1]))
    r = np.sqrt(px * px + py * py)
    return float(2.0 * np.arctanh(r.min()))


def triplet_similarity_scalar(depths, sims, tau):
    m = max(depths)
    e = [math.exp((d - m) / tau) for d in depths]
    z = sum(e)
    return sum(s * q / z for s, q in zip(sims, e))


def hc_loss_scalar(embeddings, weights, triplets, tau, lca=lca_depth_scan, **lca_kwargs):
    """Straight-line loop over triplets; ``lca`` supplies pair depths."""
    total = 0.0
    for i, j, k in triplets:
        ei, ej, ek = embeddings[i], embeddings[j], embeddings[k]
        depths = (lca(ei, ej, **lca_kwargs), lca(ei, ek, **lca_kwargs), lca(ej, ek, **lca_kwargs))
        sims = (weights[i][j], weights[i][k], weights[j][k])
        total += sum(sims) - triplet_similarity_scalar(depths, sims, tau)
    return total
