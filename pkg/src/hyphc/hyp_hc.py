"""Continuous triplet relaxation of the Dasgupta cost over disk embeddings.

For a triplet the tree-induced similarity is the softmax-weighted average of
the three pair similarities, weighted by ``lca_depth / tau``: the pair that
merges deepest dominates. Each triplet contributes
``w_ij + w_ik + w_jk - w_ijk`` and the loss is the plain sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._backend import njit
from .errors import InvalidInputError
from .geometry import _use_numba, lca_depth_grad_numpy, lca_depth_grad_scalar
from .similarity import SimilarityGraph

TAU_MIN = 1e-3


@dataclass(frozen=True)
class HcLossConfig:
    tau: float = 0.05
    anneal_factor: float = 0.5
    anneal_every: int = 50

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidInputError(f"tau must be positive, got {self.tau}")
        if not 0 < self.anneal_factor <= 1:
            raise InvalidInputError(f"anneal_factor must be in (0, 1], got {self.anneal_factor}")
        if self.anneal_every < 1:
            raise InvalidInputError(f"anneal_every must be >= 1, got {self.anneal_every}")


def anneal(cfg: HcLossConfig, epoch: int) -> HcLossConfig:
    """Temperature in effect at ``epoch``, treating ``cfg.tau`` as the start value."""
    if epoch < 0:
        raise InvalidInputError(f"epoch must be >= 0, got {epoch}")
    tau = cfg.tau * cfg.anneal_factor ** (epoch // cfg.anneal_every)
    return replace(cfg, tau=max(tau, TAU_MIN))


def triplet_similarity(e_i, e_j, e_k, w_ij: float, w_ik: float, w_jk: float, tau: float) -> float:
    emb = np.array([e_i, e_j, e_k], dtype=np.float64)
    d, _, _, _ = lca_depth_grad_numpy(emb[[0, 0, 1]], emb[[1, 2, 2]])
    a = d / tau
    s = np.exp(a - a.max())
    s /= s.sum()
    return float(np.dot([w_ij, w_ik, w_jk], s))


def _check(embeddings, graph: SimilarityGraph, triplets):
    emb = np.ascontiguousarray(embeddings, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[1] != 2:
        raise InvalidInputError(f"embeddings must be n x 2, got {emb.shape}")
    if emb.shape[0] != graph.n:
        raise InvalidInputError(
            f"{emb.shape[0]} embeddings but the similarity graph has {graph.n} nodes")
    trip = np.ascontiguousarray(triplets, dtype=np.int64).reshape(-1, 3)
    if trip.size and (trip.min() < 0 or trip.max() >= graph.n):
        raise InvalidInputError("triplet index out of range")
    return emb, trip


@njit
def _hc_kernel_numba(emb, w, trip, tau, want_grad):
    n = emb.shape[0]
    grad = np.zeros((n, 2))
    loss = 0.0
    for t in range(trip.shape[0]):
        i = trip[t, 0]
        j = trip[t, 1]
        k = trip[t, 2]
        dij, a0, a1, b0, b1, _ = lca_depth_grad_scalar(emb[i, 0], emb[i, 1], emb[j, 0], emb[j, 1])
        dik, c0, c1, e0, e1, _ = lca_depth_grad_scalar(emb[i, 0], emb[i, 1], emb[k, 0], emb[k, 1])
        djk, f0, f1, h0, h1, _ = lca_depth_grad_scalar(emb[j, 0], emb[j, 1], emb[k, 0], emb[k, 1])
        wij = w[i, j]
        wik = w[i, k]
        wjk = w[j, k]
        top = max(dij, max(dik, djk))
        sij = math.exp((dij - top) / tau)
        sik = math.exp((dik - top) / tau)
        sjk = math.exp((djk - top) / tau)
        z = sij + sik + sjk
        sij /= z
        sik /= z
        sjk /= z
        wijk = wij * sij + wik * sik + wjk * sjk
        loss += wij + wik + wjk - wijk
        if want_grad:
            # d loss / d depth_p = -s_p (w_p - w_ijk) / tau
            gij = -sij * (wij - wijk) / tau
            gik = -sik * (wik - wijk) / tau
            gjk = -sjk * (wjk - wijk) / tau
            grad[i, 0] += gij * a0 + gik * c0
            grad[i, 1] += gij * a1 + gik * c1
            grad[j, 0] += gij * b0 + gjk * f0
            grad[j, 1] += gij * b1 + gjk * f1
            grad[k, 0] += gik * e0 + gjk * h0
            grad[k, 1] += gik * e1 + gjk * h1
    return loss, grad


@njit
def _pair_cache_numba(emb):
    n = emb.shape[0]
    depth = np.zeros((n, n))
    gpair = np.zeros((n, n, 4))
    for i in range(n):
        for j in range(i + 1, n):
            d, a0, a1, b0, b1, _ = lca_depth_grad_scalar(emb[i, 0], emb[i, 1], emb[j, 0], emb[j, 1])
            depth[i, j] = d
            gpair[i, j, 0] = a0
            gpair[i, j, 1] = a1
            gpair[i, j, 2] = b0
            gpair[i, j, 3] = b1
    return depth, gpair


@njit
def _hc_kernel_pairs_numba(emb, w, trip, tau, want_grad):
    # dense path: each pair's depth and gradient computed once, upstream
    # gradients accumulated per pair, chained to the points at the end
    n = emb.shape[0]
    depth, gpair = _pair_cache_numba(emb)
    gacc = np.zeros((n, n))
    loss = 0.0
    for t in range(trip.shape[0]):
        i = trip[t, 0]
        j = trip[t, 1]
        k = trip[t, 2]
        dij = depth[i, j]
        dik = depth[i, k]
        djk = depth[j, k]
        wij = w[i, j]
        wik = w[i, k]
        wjk = w[j, k]
        top = max(dij, max(dik, djk))
        sij = math.exp((dij - top) / tau)
        sik = math.exp((dik - top) / tau)
        sjk = math.exp((djk - top) / tau)
        z = sij + sik + sjk
        sij /= z
        sik /= z
        sjk /= z
        wijk = wij * sij + wik * sik + wjk * sjk
        loss += wij + wik + wjk - wijk
        if want_grad:
            gacc[i, j] -= sij * (wij - wijk) / tau
            gacc[i, k] -= sik * (wik - wijk) / tau
            gacc[j, k] -= sjk * (wjk - wijk) / tau
    grad = np.zeros((n, 2))
    if want_grad:
        for i in range(n):
            for j in range(i + 1, n):
                g = gacc[i, j]
                if g != 0.0:
                    grad[i, 0] += g * gpair[i, j, 0]
                    grad[i, 1] += g * gpair[i, j, 1]
                    grad[j, 0] += g * gpair[i, j, 2]
                    grad[j, 1] += g * gpair[i, j, 3]
    return loss, grad


def _hc_kernel_numpy(emb, w, trip, tau, want_grad):
    i, j, k = trip[:, 0], trip[:, 1], trip[:, 2]
    firsts = np.concatenate([i, i, j])
    seconds = np.concatenate([j, k, k])
    d, gx, gy, _ = lca_depth_grad_numpy(emb[firsts], emb[seconds])
    m = len(trip)
    d = d.reshape(3, m)
    ws = w[firsts, seconds].reshape(3, m)
    a = (d - d.max(axis=0)) / tau
    s = np.exp(a)
    s /= s.sum(axis=0)
    wijk = np.sum(ws * s, axis=0)
    loss = float(np.sum(ws.sum(axis=0) - wijk))
    grad = np.zeros_like(emb)
    if want_grad:
        g = (-s * (ws - wijk) / tau).reshape(-1)
        np.add.at(grad, firsts, g[:, None] * gx)
        np.add.at(grad, seconds, g[:, None] * gy)
    return loss, grad


def _hc_kernel_pairs_numpy(emb, w, trip, tau, want_grad):
    n = len(emb)
    iu, ju = np.triu_indices(n, k=1)
    d, gx, gy, _ = lca_depth_grad_numpy(emb[iu], emb[ju])
    depth = np.zeros((n, n))
    depth[iu, ju] = d
    i, j, k = trip[:, 0], trip[:, 1], trip[:, 2]
    firsts = np.concatenate([i, i, j])
    seconds = np.concatenate([j, k, k])
    m = len(trip)
    dt = depth[firsts, seconds].reshape(3, m)
    ws = w[firsts, seconds].reshape(3, m)
    s = np.exp((dt - dt.max(axis=0)) / tau)
    s /= s.sum(axis=0)
    wijk = np.sum(ws * s, axis=0)
    loss = float(np.sum(ws.sum(axis=0) - wijk))
    grad = np.zeros_like(emb)
    if want_grad:
        g = (-s * (ws - wijk) / tau).reshape(-1)
        gacc = np.bincount(firsts * n + seconds, weights=g, minlength=n * n).reshape(n, n)
        gp = gacc[iu, ju]
        grad[:, 0] = (np.bincount(iu, gp * gx[:, 0], minlength=n)
                      + np.bincount(ju, gp * gy[:, 0], minlength=n))
        grad[:, 1] = (np.bincount(iu, gp * gx[:, 1], minlength=n)
                      + np.bincount(ju, gp * gy[:, 1], minlength=n))
    return loss, grad


def hc_loss_and_grad(embeddings, graph: SimilarityGraph, triplets, cfg: HcLossConfig,
                     want_grad: bool = True, backend: str | None = None):
    """Summed triplet loss and its ``(n, 2)`` gradient w.r.t. the embeddings."""
    emb, trip = _check(embeddings, graph, triplets)
    if len(trip) == 0:
        return 0.0, np.zeros_like(emb)
    # dense path once every pair is touched about once on average
    dense = len(trip) >= graph.n * (graph.n - 1) // 2
    if _use_numba(backend):
        kernel = _hc_kernel_pairs_numba if dense else _hc_kernel_numba
    else:
        kernel = _hc_kernel_pairs_numpy if dense else _hc_kernel_numpy
    loss, grad = kernel(emb, graph.weights, trip, float(cfg.tau), want_grad)
    return float(loss), grad


def hc_loss(embeddings, graph: SimilarityGraph, triplets, cfg: HcLossConfig,
            backend: str | None = None) -> float:
    return hc_loss_and_grad(embeddings, graph, triplets, cfg, want_grad=False, backend=backend)[0]


def hc_loss_backward(embeddings, graph: SimilarityGraph, triplets, cfg: HcLossConfig,
                     backend: str | None = None) -> np.ndarray:
    """Gradient of :func:`hc_loss`. Triplets with a degenerate pair get a zero
    contribution through that pair."""
    return hc_loss_and_grad(embeddings, graph, triplets, cfg, backend=backend)[1]
