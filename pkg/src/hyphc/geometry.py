"""Poincaré-disk primitives (curvature -1, two dimensions).

The depth of a pair is the hyperbolic distance from the origin (the root)
to the geodesic segment joining the two points. For a geodesic that misses
the origin the supporting circle has centre ``c`` with ``x.c = (1+|x|^2)/2``
and radius ``sqrt(|c|^2 - 1)``; its point nearest the origin has Euclidean
norm ``1 / (|c| + sqrt(|c|^2 - 1))``.
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import USE_NUMBA, njit
from .errors import ContractViolation, InvalidInputError

EPS_BOUNDARY = 1e-5
R_MAX = 1.0 - EPS_BOUNDARY
DIAMETER_TOL = 1e-12


def _as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=np.float64)
    if a.shape != (2,):
        raise InvalidInputError(f"expected a 2-vector, got shape {a.shape}")
    if not (a @ a < 1.0):
        raise ContractViolation(f"point {a.tolist()} is not inside the unit disk")
    return a


def poincare_distance(x, y) -> float:
    x = _as_point(x)
    y = _as_point(y)
    diff = x - y
    denom = (1.0 - x @ x) * (1.0 - y @ y)
    return float(np.arccosh(1.0 + 2.0 * (diff @ diff) / denom))


def poincare_distance_batch(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise distances between two ``(m, 2)`` arrays of disk points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    diff2 = np.sum((x - y) ** 2, axis=-1)
    denom = (1.0 - np.sum(x * x, axis=-1)) * (1.0 - np.sum(y * y, axis=-1))
    return np.arccosh(1.0 + 2.0 * diff2 / denom)


def distance_to_origin(x) -> float:
    x = _as_point(x)
    return 2.0 * math.atanh(math.sqrt(x @ x))


# ---------------------------------------------------------------------------
# lca depth: numpy (vectorised over rows) and numba (scalar) kernels
# ---------------------------------------------------------------------------


def lca_depth_grad_numpy(x: np.ndarray, y: np.ndarray):
    """Depth, gradients and degeneracy flags for ``(m, 2)`` point arrays.

    Returns ``(depth, grad_x, grad_y, degenerate)``. Degenerate rows (the
    segment passes through the origin) get depth 0 and zero gradients.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x0, x1 = x[:, 0], x[:, 1]
    y0, y1 = y[:, 0], y[:, 1]
    nx2 = x0 * x0 + x1 * x1
    ny2 = y0 * y0 + y1 * y1
    det = x0 * y1 - x1 * y0
    diam = np.abs(det) < DIAMETER_TOL

    with np.errstate(divide="ignore", invalid="ignore"):
        safe_det = np.where(diam, 1.0, det)
        bx = 0.5 * (1.0 + nx2)
        by = 0.5 * (1.0 + ny2)
        c0 = (bx * y1 - by * x1) / safe_det
        c1 = (x0 * by - y0 * bx) / safe_det
        rho2 = c0 * c0 + c1 * c1
        rho = np.sqrt(rho2)
        s2 = np.maximum(rho2 - 1.0, 1e-300)
        t = 1.0 / (rho + np.sqrt(s2))
        inside = (c0 * x1 - c1 * x0) * (c0 * y1 - c1 * y0) <= 0.0
        interior = ~diam & inside

        # d depth / d rho = -1 / (rho^2 - 1); then back through A c = b
        g_rho = -1.0 / s2
        gc0 = g_rho * c0 / rho
        gc1 = g_rho * c1 / rho
        u0 = (y1 * gc0 - y0 * gc1) / safe_det
        u1 = (x0 * gc1 - x1 * gc0) / safe_det

    depth = np.zeros(len(x))
    gx = np.zeros_like(x)
    gy = np.zeros_like(y)

    depth[interior] = 2.0 * np.arctanh(t[interior])
    gx[interior, 0] = u0[interior] * (x0[interior] - c0[interior])
    gx[interior, 1] = u0[interior] * (x1[interior] - c1[interior])
    gy[interior, 0] = u1[interior] * (y0[interior] - c0[interior])
    gy[interior, 1] = u1[interior] * (y1[interior] - c1[interior])

    # endpoint case: the nearer endpoint to the origin is the lca
    opposite = diam & (x0 * y0 + x1 * y1 <= 0.0)
    endpoint = ~interior & ~opposite
    nmin2 = np.minimum(nx2, ny2)
    endpoint_zero = endpoint & (nmin2 == 0.0)
    degenerate = opposite | endpoint_zero
    endpoint &= ~endpoint_zero

    nmin = np.sqrt(nmin2[endpoint])
    depth[endpoint] = 2.0 * np.arctanh(nmin)
    scale = np.zeros(len(x))
    scale[endpoint] = 2.0 / ((1.0 - nmin2[endpoint]) * nmin)
    # an exact tie means x == y; only x takes the gradient so that moving
    # both points together sees the derivative of d(o, x) once
    use_x = endpoint & (nx2 <= ny2)
    use_y = endpoint & (ny2 < nx2)
    gx[use_x] = scale[use_x, None] * x[use_x]
    gy[use_y] = scale[use_y, None] * y[use_y]
    return depth, gx, gy, degenerate


@njit
def lca_depth_grad_scalar(x0, x1, y0, y1):
    """Scalar kernel: ``(depth, gx0, gx1, gy0, gy1, degenerate)``."""
    nx2 = x0 * x0 + x1 * x1
    ny2 = y0 * y0 + y1 * y1
    det = x0 * y1 - x1 * y0
    if abs(det) >= DIAMETER_TOL:
        bx = 0.5 * (1.0 + nx2)
        by = 0.5 * (1.0 + ny2)
        c0 = (bx * y1 - by * x1) / det
        c1 = (x0 * by - y0 * bx) / det
        if (c0 * x1 - c1 * x0) * (c0 * y1 - c1 * y0) <= 0.0:
            rho2 = c0 * c0 + c1 * c1
            rho = math.sqrt(rho2)
            s2 = max(rho2 - 1.0, 1e-300)
            t = 1.0 / (rho + math.sqrt(s2))
            g_rho = -1.0 / s2
            gc0 = g_rho * c0 / rho
            gc1 = g_rho * c1 / rho
            u0 = (y1 * gc0 - y0 * gc1) / det
            u1 = (x0 * gc1 - x1 * gc0) / det
            return (2.0 * math.atanh(t), u0 * (x0 - c0), u0 * (x1 - c1),
                    u1 * (y0 - c0), u1 * (y1 - c1), False)
    elif x0 * y0 + x1 * y1 <= 0.0:
        return 0.0, 0.0, 0.0, 0.0, 0.0, True
    nmin2 = min(nx2, ny2)
    if nmin2 == 0.0:
        return 0.0, 0.0, 0.0, 0.0, 0.0, True
    nmin = math.sqrt(nmin2)
    scale = 2.0 / ((1.0 - nmin2) * nmin)
    gx0 = gx1 = gy0 = gy1 = 0.0
    if nx2 <= ny2:
        gx0 = scale * x0
        gx1 = scale * x1
    else:
        gy0 = scale * y0
        gy1 = scale * y1
    return 2.0 * math.atanh(nmin), gx0, gx1, gy0, gy1, False


@njit
def _pairwise_lca_numba(emb):
    n = emb.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        out[i, i] = 2.0 * math.atanh(math.sqrt(emb[i, 0] ** 2 + emb[i, 1] ** 2))
        for j in range(i + 1, n):
            d = lca_depth_grad_scalar(emb[i, 0], emb[i, 1], emb[j, 0], emb[j, 1])[0]
            out[i, j] = d
            out[j, i] = d
    return out


def _pairwise_lca_numpy(emb):
    n = len(emb)
    iu, ju = np.triu_indices(n, k=1)
    d = lca_depth_grad_numpy(emb[iu], emb[ju])[0]
    out = np.zeros((n, n))
    out[iu, ju] = d
    out[ju, iu] = d
    out[np.arange(n), np.arange(n)] = 2.0 * np.arctanh(np.sqrt(np.sum(emb * emb, axis=1)))
    return out


def pairwise_lca_depth(embeddings: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Symmetric ``(n, n)`` matrix of lca depths; diagonal is ``d(o, x_i)``."""
    emb = np.ascontiguousarray(embeddings, dtype=np.float64)
    if _use_numba(backend):
        return _pairwise_lca_numba(emb)
    return _pairwise_lca_numpy(emb)


def _use_numba(backend: str | None) -> bool:
    if backend is None:
        return USE_NUMBA
    if backend not in ("numba", "numpy"):
        raise InvalidInputError(f"unknown backend {backend!r}")
    return backend == "numba"


def lca_depth(x, y) -> float:
    """Hyperbolic distance from the origin to the geodesic segment ``[x, y]``.

    Larger values mean the pair merges farther from the root.
    """
    x = _as_point(x)
    y = _as_point(y)
    return float(lca_depth_grad_numpy(x[None], y[None])[0][0])


def lca_depth_gradient(x, y):
    """Analytic gradient of :func:`lca_depth`.

    Returns ``(grad_x, grad_y, degenerate)``. When the segment passes
    through the origin the depth has a kink; both gradients are then zero
    and ``degenerate`` is True. With ``|x| == |y|`` on a common ray both
    points receive the radial gradient.
    """
    x = _as_point(x)
    y = _as_point(y)
    _, gx, gy, deg = lca_depth_grad_numpy(x[None], y[None])
    return gx[0], gy[0], bool(deg[0])


# ---------------------------------------------------------------------------
# projection of raw vectors into the disk
# ---------------------------------------------------------------------------


def _projection_factors(v: np.ndarray):
    """Per-row ``f(s) = R_MAX tanh(s)/s`` and ``f'(s)/s`` with ``s = |v|``."""
    s = np.sqrt(np.sum(v * v, axis=-1))
    small = s < 1e-4
    with np.errstate(divide="ignore", invalid="ignore"):
        th = np.tanh(s)
        f = np.where(small, 1.0 - s * s / 3.0, th / s)
        sech2 = 1.0 - th * th
        fp_over_s = np.where(small, -2.0 / 3.0 + 8.0 / 15.0 * s * s, (sech2 * s - th) / (s ** 3))
    return R_MAX * f, R_MAX * fp_over_s


def project_to_disk(v) -> np.ndarray:
    """Map raw vectors into the disk: ``v * R_MAX * tanh(|v|) / |v|``.

    Accepts a single 2-vector or an ``(m, 2)`` array.
    """
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("project_to_disk received non-finite input")
    f, _ = _projection_factors(v)
    return v * f[..., None]


def project_to_disk_vjp(v: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Pull ``grad_out`` (gradient w.r.t. the projected points) back to ``v``."""
    v = np.asarray(v, dtype=np.float64)
    f, fp_over_s = _projection_factors(v)
    vg = np.sum(v * grad_out, axis=-1)
    return f[..., None] * grad_out + (fp_over_s * vg)[..., None] * v
