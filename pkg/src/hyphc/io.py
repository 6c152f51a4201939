"""CSV formats and atomic file writes used by the CLI.

All CSVs are UTF-8 with one header line; floats are written with 17
significant digits so they round-trip exactly.
"""

from __future__ import annotations

import csv
import os
import tempfile

import numpy as np

from .errors import InvalidInputError
from .similarity import SimilarityGraph

FLOAT_FMT = "{:.17g}"


def atomic_write(path, data: str | bytes) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_rows(path):
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise InvalidInputError(f"file not found: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise InvalidInputError(f"{path}: empty file")
    return rows[0], rows[1:]


def _float(value, path, row):
    try:
        return float(value)
    except ValueError:
        raise InvalidInputError(f"{path}: row {row}: not a number: {value!r}") from None


def read_features(path):
    """Feature matrix and optional integer labels (a column named ``label``)."""
    header, body = _read_rows(path)
    label_col = header.index("label") if "label" in header else None
    feat_cols = [i for i in range(len(header)) if i != label_col]
    if not feat_cols:
        raise InvalidInputError(f"{path}: no feature columns")
    feats, labels = [], []
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise InvalidInputError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
        feats.append([_float(row[i], path, r) for i in feat_cols])
        if label_col is not None:
            try:
                labels.append(int(row[label_col]))
            except ValueError:
                raise InvalidInputError(f"{path}: row {r}: bad label {row[label_col]!r}") from None
    x = np.array(feats, dtype=np.float64).reshape(len(feats), len(feat_cols))
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(x), axis=1))[0]) + 1
        raise InvalidInputError(f"{path}: row {bad} has non-finite features")
    return x, (np.array(labels, dtype=np.int64) if label_col is not None else None)


def features_csv(x: np.ndarray, labels=None) -> str:
    header = [f"f{i}" for i in range(x.shape[1])] + (["label"] if labels is not None else [])
    lines = [",".join(header)]
    for i, row in enumerate(x):
        fields = [FLOAT_FMT.format(v) for v in row]
        if labels is not None:
            fields.append(str(int(labels[i])))
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def read_labels(path) -> np.ndarray:
    header, body = _read_rows(path)
    if header != ["index", "label"]:
        raise InvalidInputError(f"{path}: header must be 'index,label'")
    by_index = {}
    for r, row in enumerate(body, start=1):
        if len(row) != 2:
            raise InvalidInputError(f"{path}: row {r} must have 2 fields")
        try:
            by_index[int(row[0])] = row[1].strip()
        except ValueError:
            raise InvalidInputError(f"{path}: row {r}: bad index {row[0]!r}") from None
    if sorted(by_index) != list(range(len(by_index))):
        raise InvalidInputError(f"{path}: indices must cover 0..n-1 exactly once")
    return np.array([by_index[i] for i in range(len(by_index))])


def embeddings_csv(emb: np.ndarray) -> str:
    lines = ["index,x,y"]
    for i, (a, b) in enumerate(emb):
        lines.append(f"{i},{FLOAT_FMT.format(a)},{FLOAT_FMT.format(b)}")
    return "\n".join(lines) + "\n"


def read_embeddings(path) -> np.ndarray:
    header, body = _read_rows(path)
    if header != ["index", "x", "y"]:
        raise InvalidInputError(f"{path}: header must be 'index,x,y'")
    pts = {}
    for r, row in enumerate(body, start=1):
        if len(row) != 3:
            raise InvalidInputError(f"{path}: row {r} must have 3 fields")
        try:
            idx = int(row[0])
        except ValueError:
            raise InvalidInputError(f"{path}: row {r}: bad index {row[0]!r}") from None
        p = (_float(row[1], path, r), _float(row[2], path, r))
        if not (np.isfinite(p).all() and p[0] ** 2 + p[1] ** 2 < 1.0):
            raise InvalidInputError(f"{path}: row {r} (index {idx}) is not inside the unit disk")
        pts[idx] = p
    if sorted(pts) != list(range(len(pts))):
        raise InvalidInputError(f"{path}: indices must cover 0..n-1 exactly once")
    return np.array([pts[i] for i in range(len(pts))], dtype=np.float64).reshape(-1, 2)


def read_similarities(path, n: int) -> SimilarityGraph:
    """Edge list with header ``i,j,w``; unlisted pairs have similarity 0."""
    header, body = _read_rows(path)
    if header != ["i", "j", "w"]:
        raise InvalidInputError(f"{path}: header must be 'i,j,w'")
    edges = []
    for r, row in enumerate(body, start=1):
        if len(row) != 3:
            raise InvalidInputError(f"{path}: row {r} must have 3 fields")
        try:
            edges.append((int(row[0]), int(row[1]), _float(row[2], path, r)))
        except ValueError:
            raise InvalidInputError(f"{path}: row {r}: bad node index") from None
    return SimilarityGraph.from_edges(n, edges)


def similarities_csv(graph: SimilarityGraph) -> str:
    lines = ["i,j,w"]
    iu, ju = np.triu_indices(graph.n, k=1)
    for i, j in zip(iu, ju):
        lines.append(f"{i},{j},{FLOAT_FMT.format(graph.weights[i, j])}")
    return "\n".join(lines) + "\n"
