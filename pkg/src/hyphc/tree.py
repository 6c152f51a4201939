"""Binary dendrograms: decoding from disk embeddings, costs, purity, export.

Node ids follow the linkage convention: leaves are ``0 .. n-1`` and the
internal node created by the ``k``-th merge is ``n + k``, so the root is
``2n - 2`` and every child id is smaller than its parent's id.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._backend import njit
from .errors import InvalidInputError, ParseError, UndefinedMetricError
from .geometry import _use_numba, pairwise_lca_depth
from .similarity import SimilarityGraph


@dataclass(frozen=True, eq=False)
class Dendrogram:
    n_leaves: int
    children: np.ndarray  # (n_leaves - 1, 2); row k holds the children of node n + k

    def __post_init__(self):
        n = int(self.n_leaves)
        ch = np.array(self.children, dtype=np.int64).reshape(-1, 2)
        if n < 2:
            raise InvalidInputError(f"a dendrogram needs at least 2 leaves, got {n}")
        if len(ch) != n - 1:
            raise InvalidInputError(f"expected {n - 1} internal nodes, got {len(ch)}")
        parents = n + np.arange(n - 1)
        if np.any(ch < 0) or np.any(ch >= parents[:, None]):
            raise InvalidInputError("each child id must be non-negative and below its parent's id")
        counts = np.bincount(ch.ravel(), minlength=2 * n - 1)
        if np.any(counts[:-1] != 1):
            raise InvalidInputError("every non-root node must have exactly one parent")
        ch.flags.writeable = False
        object.__setattr__(self, "n_leaves", n)
        object.__setattr__(self, "children", ch)

    @property
    def root(self) -> int:
        return 2 * self.n_leaves - 2

    @cached_property
    def _layout(self):
        """Left-to-right leaf order and the ``[start, mid, end)`` leaf span of
        every internal node (left subtree ``[start, mid)``)."""
        n = self.n_leaves
        order = np.empty(n, dtype=np.int64)
        spans = np.empty((n - 1, 3), dtype=np.int64)
        start = np.empty(2 * n - 1, dtype=np.int64)
        end = np.empty(2 * n - 1, dtype=np.int64)
        pos = 0
        stack = [(self.root, False)]
        while stack:
            node, done = stack.pop()
            if node < n:
                order[pos] = node
                start[node], end[node] = pos, pos + 1
                pos += 1
            elif done:
                left, right = self.children[node - n]
                start[node], end[node] = start[left], end[right]
                spans[node - n] = (start[left], end[left], end[right])
            else:
                left, right = self.children[node - n]
                stack.append((node, True))
                stack.append((right, False))
                stack.append((left, False))
        return order, spans

    @property
    def leaf_order(self) -> np.ndarray:
        return self._layout[0]

    @cached_property
    def leaf_counts(self) -> np.ndarray:
        """Number of leaves under every node id."""
        n = self.n_leaves
        counts = np.ones(2 * n - 1, dtype=np.int64)
        for k, (a, b) in enumerate(self.children):
            counts[n + k] = counts[a] + counts[b]
        return counts

    def parents(self) -> np.ndarray:
        par = np.full(2 * self.n_leaves - 1, -1, dtype=np.int64)
        for k, (a, b) in enumerate(self.children):
            par[a] = par[b] = self.n_leaves + k
        return par

    def structure(self):
        """Nested tuples of leaf ids; left/right order preserved, ranks dropped."""
        n = self.n_leaves
        built = {}
        for k, (a, b) in enumerate(self.children):
            built[n + k] = (built.pop(a, int(a)) if a >= n else int(a),
                            built.pop(b, int(b)) if b >= n else int(b))
        return built[self.root]

    def __eq__(self, other):
        if not isinstance(other, Dendrogram):
            return NotImplemented
        return self.n_leaves == other.n_leaves and to_newick(self) == to_newick(other)

    def __hash__(self):
        return hash(to_newick(self))

    def __repr__(self):
        return f"Dendrogram({to_newick(self)})"

    @classmethod
    def from_nested(cls, nested) -> "Dendrogram":
        """Build from nested 2-tuples of leaf ids, e.g. ``((0, 1), 2)``."""
        return from_newick(_nested_to_newick(nested) + ";")


def _nested_to_newick(t) -> str:
    if isinstance(t, tuple):
        if len(t) != 2:
            raise InvalidInputError(f"non-binary node {t!r}")
        return f"({_nested_to_newick(t[0])},{_nested_to_newick(t[1])})"
    return str(int(t))


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------


@njit
def _agglomerate_numba(pi, pj, n):
    parent = np.arange(n)
    node = np.arange(n)
    children = np.empty((n - 1, 2), dtype=np.int64)
    merged = 0
    for t in range(pi.shape[0]):
        a = pi[t]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = pj[t]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a == b:
            continue
        children[merged, 0] = node[a]
        children[merged, 1] = node[b]
        parent[b] = a
        node[a] = n + merged
        merged += 1
        if merged == n - 1:
            break
    return children


def _agglomerate_python(pi, pj, n):
    parent = list(range(n))
    node = list(range(n))
    children = np.empty((n - 1, 2), dtype=np.int64)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    merged = 0
    for a, b in zip(pi.tolist(), pj.tolist()):
        a, b = find(a), find(b)
        if a == b:
            continue
        children[merged] = (node[a], node[b])
        parent[b] = a
        node[a] = n + merged
        merged += 1
        if merged == n - 1:
            break
    return children


def decode(embeddings, backend: str | None = None) -> Dendrogram:
    """Agglomerate pairs in order of decreasing lca depth.

    Ties are broken by lexicographic ``(i, j)`` order. The left child of each
    merge is the component holding the smaller index of the triggering pair.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[1] != 2:
        raise InvalidInputError(f"embeddings must be n x 2, got shape {emb.shape}")
    n = len(emb)
    if n < 2:
        raise InvalidInputError(f"decode needs at least 2 points, got {n}")
    if not np.all(np.isfinite(emb)) or np.any(np.sum(emb * emb, axis=1) >= 1.0):
        raise InvalidInputError("embeddings must be finite points inside the unit disk")
    depth = pairwise_lca_depth(emb, backend=backend)
    iu, ju = np.triu_indices(n, k=1)
    order = np.lexsort((ju, iu, -depth[iu, ju]))
    pi = np.ascontiguousarray(iu[order], dtype=np.int64)
    pj = np.ascontiguousarray(ju[order], dtype=np.int64)
    agg = _agglomerate_numba if _use_numba(backend) else _agglomerate_python
    return Dendrogram(n, agg(pi, pj, n))


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def dasgupta_cost(tree: Dendrogram, graph: SimilarityGraph) -> float:
    """``sum_{u<v} w(u, v) * |leaves(lca(u, v))|``."""
    if tree.n_leaves != graph.n:
        raise InvalidInputError(f"tree has {tree.n_leaves} leaves but graph has {graph.n} nodes")
    order, spans = tree._layout
    w = graph.weights[np.ix_(order, order)]
    cost = 0.0
    # the pairs split by a node are exactly its left x right leaf block
    for a, b, c in spans:
        cost += (c - a) * float(w[a:b, b:c].sum())
    return cost


def dendrogram_purity(tree: Dendrogram, labels) -> float:
    """Mean over same-class leaf pairs of the class fraction under their lca."""
    labels = np.asarray(labels)
    if labels.shape != (tree.n_leaves,):
        raise InvalidInputError(f"expected {tree.n_leaves} labels, got shape {labels.shape}")
    _, codes = np.unique(labels, return_inverse=True)
    class_sizes = np.bincount(codes)
    n_pairs = int(np.sum(class_sizes * (class_sizes - 1) // 2))
    if n_pairs == 0:
        raise UndefinedMetricError("dendrogram purity needs at least one class with two members")
    order, spans = tree._layout
    onehot = np.zeros((tree.n_leaves + 1, len(class_sizes)), dtype=np.int64)
    onehot[np.arange(1, tree.n_leaves + 1), codes[order]] = 1
    cum = np.cumsum(onehot, axis=0)
    a, b, c = spans[:, 0], spans[:, 1], spans[:, 2]
    left = cum[b] - cum[a]
    right = cum[c] - cum[b]
    split_pairs = left * right
    frac = (left + right) / (c - a)[:, None]
    return float(np.sum(split_pairs * frac) / n_pairs)


# ---------------------------------------------------------------------------
# Newick / DOT
# ---------------------------------------------------------------------------


def to_newick(tree: Dendrogram) -> str:
    n = tree.n_leaves
    parts = []
    stack = [tree.root]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
        elif item < n:
            parts.append(str(item))
        else:
            left, right = tree.children[item - n]
            stack.extend((")", int(right), ",", int(left), "("))
    return "".join(parts) + ";"


def from_newick(text: str) -> Dendrogram:
    """Parse a binary Newick tree whose leaf names are ``0 .. n-1``.

    Branch lengths and internal labels are rejected. Errors carry the
    character position.
    """
    pos = 0
    size = len(text)
    stack: list[list] = []   # open nodes: [children..., open_pos]
    internals: list = []     # (left, right) with ("L", i) / ("I", k) refs
    leaf_pos: dict[int, int] = {}
    root = None
    expect_item = True

    while pos < size:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if root is not None:
            if ch == ";":
                break
            raise ParseError(f"unexpected {ch!r} after complete tree", pos)
        if ch == "(":
            if not expect_item:
                raise ParseError("unexpected '('", pos)
            stack.append([pos])
            pos += 1
        elif ch.isdigit():
            if not expect_item:
                raise ParseError("unexpected leaf name", pos)
            start = pos
            while pos < size and text[pos].isdigit():
                pos += 1
            leaf = int(text[start:pos])
            if leaf in leaf_pos:
                raise ParseError(f"duplicate leaf {leaf}", start)
            leaf_pos[leaf] = start
            if not stack:
                raise ParseError("a tree needs at least 2 leaves", start)
            stack[-1].append(("L", leaf))
            expect_item = False
        elif ch == ",":
            if expect_item or not stack:
                raise ParseError("unexpected ','", pos)
            expect_item = True
            pos += 1
        elif ch == ")":
            if expect_item or not stack:
                raise ParseError("unbalanced or misplaced ')'", pos)
            node = stack.pop()
            kids = node[1:]
            if len(kids) != 2:
                kind = "non-binary" if len(kids) > 2 else "unary"
                raise ParseError(f"{kind} node with {len(kids)} children", node[0])
            internals.append(tuple(kids))
            ref = ("I", len(internals) - 1)
            pos += 1
            if stack:
                stack[-1].append(ref)
            else:
                root = ref
        elif ch == ";":
            raise ParseError("unexpected ';' before the tree is complete", pos)
        elif ch == ":":
            raise ParseError("branch lengths are not supported", pos)
        else:
            raise ParseError(f"unexpected character {ch!r}", pos)

    if root is None:
        raise ParseError("unbalanced parentheses: input ended inside the tree", size)
    if pos >= size or text[pos] != ";":
        raise ParseError("missing terminating ';'", size)
    rest = text[pos + 1:]
    if rest.strip():
        raise ParseError("trailing text after ';'", pos + 1 + len(rest) - len(rest.lstrip()))

    n = len(leaf_pos)
    for leaf, at in leaf_pos.items():
        if leaf >= n:
            raise ParseError(f"leaf {leaf} out of range for {n} leaves", at)

    def node_id(ref):
        return ref[1] if ref[0] == "L" else n + ref[1]

    children = np.array([[node_id(a), node_id(b)] for a, b in internals], dtype=np.int64)
    return Dendrogram(n, children)


def to_dot(tree: Dendrogram) -> str:
    """Directed graph; internal nodes are labelled by merge rank."""
    n = tree.n_leaves
    lines = ["digraph dendrogram {"]
    for leaf in range(n):
        lines.append(f'  n{leaf} [label="{leaf}", shape=box];')
    for k in range(n - 1):
        lines.append(f'  n{n + k} [label="{k}", shape=ellipse];')
    for k, (a, b) in enumerate(tree.children):
        lines.append(f"  n{n + k} -> n{a};")
        lines.append(f"  n{n + k} -> n{b};")
    lines.append("}")
    return "\n".join(lines) + "\n"
