"""Minimal numpy MLP encoder with a Poincaré-disk embedding head.

Layers compute ``y = act(x @ W + b)`` with ``W`` of shape ``(fan_in, fan_out)``.
The encoder output is the latent ``z``; the head applies an affine map to
two dimensions followed by :func:`~hyphc.geometry.project_to_disk`.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ContractViolation, InvalidInputError
from .geometry import _projection_factors, project_to_disk_vjp

ACTIVATIONS = ("identity", "relu")
CKPT_MAGIC = b"HYPH"
CKPT_VERSION = 1


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "relu"


@dataclass
class EncoderModel:
    layers: list[Layer]
    head: Layer  # affine d_z -> 2, activation "identity"

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise InvalidInputError("consecutive layer dimensions do not match")
        for layer in [*self.layers, self.head]:
            if layer.activation not in ACTIVATIONS:
                raise InvalidInputError(f"unknown activation {layer.activation!r}")
            if layer.bias.shape != (layer.weight.shape[1],):
                raise InvalidInputError("bias length does not match weight fan-out")
        if self.head.weight.shape != (self.latent_dim, 2):
            raise InvalidInputError(f"head must map {self.latent_dim} -> 2")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in checkpoint order: each layer's W, b, then the head's."""
        out = []
        for layer in [*self.layers, self.head]:
            out += [layer.weight, layer.bias]
        return out

    def with_params(self, params: list[np.ndarray]) -> "EncoderModel":
        it = iter(params)
        layers = [Layer(next(it), next(it), l.activation) for l in self.layers]
        head = Layer(next(it), next(it), "identity")
        return EncoderModel(layers, head)

    def n_encoder_params(self) -> int:
        """Number of arrays in :meth:`params` that belong to the encoder."""
        return 2 * len(self.layers)


def init_encoder(input_dim: int, hidden=(64, 64), latent_dim: int = 16,
                 rng: np.random.Generator | int | None = 0) -> EncoderModel:
    """Glorot-uniform weights, zero biases; ReLU hidden layers, linear latent."""
    rng = np.random.default_rng(rng)
    dims = [input_dim, *hidden, latent_dim]

    def glorot(fan_in, fan_out):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    layers = []
    for k, (a, b) in enumerate(zip(dims, dims[1:])):
        act = "relu" if k < len(dims) - 2 else "identity"
        layers.append(Layer(glorot(a, b), np.zeros(b), act))
    head = Layer(glorot(latent_dim, 2), np.zeros(2), "identity")
    return EncoderModel(layers, head)


@dataclass
class Tape:
    model_id: int
    shapes: tuple
    inputs: list[np.ndarray] = field(default_factory=list)
    preacts: list[np.ndarray] = field(default_factory=list)
    latents: np.ndarray | None = None
    head_raw: np.ndarray | None = None


def _shapes(model: EncoderModel) -> tuple:
    return tuple(p.shape for p in model.params())


def forward(model: EncoderModel, batch):
    """Returns ``(latents, embeddings, tape)``."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise InvalidInputError(
            f"batch must be b x {model.input_dim}, got shape {x.shape}")
    tape = Tape(id(model), _shapes(model))
    h = x
    for layer in model.layers:
        tape.inputs.append(h)
        pre = h @ layer.weight + layer.bias
        tape.preacts.append(pre)
        h = np.maximum(pre, 0.0) if layer.activation == "relu" else pre
    tape.latents = h
    raw = h @ model.head.weight + model.head.bias
    tape.head_raw = raw
    # unchecked projection: a diverged model yields NaNs for fit() to report
    return h, raw * _projection_factors(raw)[0][:, None], tape


def backward(model: EncoderModel, tape: Tape, grad_latents=None, grad_embeddings=None):
    """Parameter gradients, in :meth:`EncoderModel.params` order.

    ``grad_latents`` flows in at the encoder output, ``grad_embeddings`` at
    the disk coordinates; either may be ``None`` (treated as zero).
    """
    if tape.model_id != id(model) or tape.shapes != _shapes(model):
        raise ContractViolation("tape was recorded by a different model")
    z = tape.latents
    g_z = np.zeros_like(z) if grad_latents is None else np.array(grad_latents, dtype=np.float64)
    if g_z.shape != z.shape:
        raise ContractViolation(f"grad_latents has shape {g_z.shape}, expected {z.shape}")
    if grad_embeddings is not None:
        g_e = np.asarray(grad_embeddings, dtype=np.float64)
        if g_e.shape != tape.head_raw.shape:
            raise ContractViolation("grad_embeddings shape does not match the batch")
        g_raw = project_to_disk_vjp(tape.head_raw, g_e)
    else:
        g_raw = np.zeros_like(tape.head_raw)
    head_grads = [z.T @ g_raw, g_raw.sum(axis=0)]
    g = g_z + g_raw @ model.head.weight.T

    grads = []
    for layer, inp, pre in zip(reversed(model.layers), reversed(tape.inputs), reversed(tape.preacts)):
        if layer.activation == "relu":
            g = g * (pre > 0.0)
        grads.append(g.sum(axis=0))
        grads.append(inp.T @ g)
        g = g @ layer.weight.T
    return grads[::-1] + head_grads


# ---------------------------------------------------------------------------
# augmentation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentationConfig:
    gaussian_sigma: float = 0.5
    mask_prob: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.gaussian_sigma >= 0:
            raise InvalidInputError(f"gaussian_sigma must be >= 0, got {self.gaussian_sigma}")
        if not 0 <= self.mask_prob < 1:
            raise InvalidInputError(f"mask_prob must be in [0, 1), got {self.mask_prob}")


def augment(batch, cfg: AugmentationConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Additive Gaussian noise, then independent per-feature zero masking.

    Uses ``cfg.seed`` unless a generator is passed in.
    """
    x = np.asarray(batch, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("augment received non-finite input")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    noise = rng.standard_normal(x.shape)
    keep = rng.random(x.shape) >= cfg.mask_prob
    return (x + cfg.gaussian_sigma * noise) * keep


# ---------------------------------------------------------------------------
# contrastive losses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NTXent:
    tau: float = 0.5

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidInputError(f"contrastive temperature must be positive, got {self.tau}")


@dataclass(frozen=True)
class GenericContrastive:
    """``sum_i phi(sum_{j != i} psi(|z_i - z'_i|^2 - |z_i - z_j|^2))``.

    ``phi`` and ``psi`` must be increasing; derivatives are supplied by the
    caller. Monotonicity is probed on a grid at construction.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    psi: Callable[[np.ndarray], np.ndarray]
    dpsi: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        # on unit vectors the psi argument lies in [-4, 4]
        grid = np.linspace(-4.0, 4.0, 81)
        psi_vals = self.psi(grid)
        if np.any(self.dpsi(grid) < 0) or np.any(np.diff(psi_vals) < 0):
            raise InvalidInputError("psi must be monotonically increasing")
        span = np.linspace(0.0, float(np.max(psi_vals)) * 64, 81)
        if np.any(self.dphi(span) < 0) or np.any(np.diff(self.phi(span)) < 0):
            raise InvalidInputError("phi must be monotonically increasing")


def ntxent_as_generic(tau: float) -> GenericContrastive:
    """The (phi, psi) pair that reproduces :class:`NTXent` on unit vectors."""
    return GenericContrastive(
        phi=np.log1p,
        dphi=lambda s: 1.0 / (1.0 + s),
        psi=lambda d: np.exp(d / (2.0 * tau)),
        dpsi=lambda d: np.exp(d / (2.0 * tau)) / (2.0 * tau),
    )


def _normalize(z):
    norm = np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-12)
    return z / norm, norm


def _normalize_vjp(u, norm, g):
    return (g - u * np.sum(u * g, axis=1, keepdims=True)) / norm


def _ntxent(u, v, tau):
    b = len(u)
    sim = u @ u.T
    pos = np.sum(u * v, axis=1)
    logits = (sim - pos[:, None]) / tau
    logits[np.arange(b), np.arange(b)] = 0.0  # slot i stands for the "1 +" term
    top = logits.max(axis=1, keepdims=True)
    ex = np.exp(logits - top)
    loss_i = top[:, 0] + np.log(ex.sum(axis=1))
    q = ex / ex.sum(axis=1, keepdims=True)
    q[np.arange(b), np.arange(b)] = 0.0
    # d loss_i / d sim_ij = q_ij / tau ; d loss_i / d pos_i = -sum_j q_ij / tau
    q /= tau
    g_u = q @ u + q.T @ u - q.sum(axis=1)[:, None] * v
    g_v = -q.sum(axis=1)[:, None] * u
    return float(loss_i.sum()), g_u, g_v


def _generic(u, v, fam: GenericContrastive):
    b = len(u)
    pos_d = np.sum((u - v) ** 2, axis=1)
    diff = u[:, None, :] - u[None, :, :]
    neg_d = np.sum(diff ** 2, axis=2)
    delta = pos_d[:, None] - neg_d
    off = ~np.eye(b, dtype=bool)
    psi = np.where(off, fam.psi(delta), 0.0)
    s = psi.sum(axis=1)
    loss = float(np.sum(fam.phi(s)))
    G = fam.dphi(s)[:, None] * np.where(off, fam.dpsi(delta), 0.0)
    # d delta_ij/du_i = 2(u_j - v_i), d/dv_i = -2(u_i - v_i), d/du_j = 2(u_i - u_j)
    rows = G.sum(axis=1)
    cols = G.sum(axis=0)
    g_u = 2.0 * (G @ u - rows[:, None] * v) + 2.0 * (G.T @ u - cols[:, None] * u)
    g_v = -2.0 * rows[:, None] * (u - v)
    return loss, g_u, g_v


def contrastive_loss(z, z_pos, family=NTXent()):
    """Summed contrastive loss over anchors, with gradients w.r.t. both views.

    Rows are L2-normalised inside (and differentiated through). Negatives for
    anchor ``i`` are the other anchors ``z_j``. Returns ``(loss, g_z, g_z_pos)``.
    """
    z = np.asarray(z, dtype=np.float64)
    z_pos = np.asarray(z_pos, dtype=np.float64)
    if z.ndim != 2 or z.shape != z_pos.shape:
        raise InvalidInputError("z and z_pos must be matching b x d arrays")
    if len(z) < 2:
        raise InvalidInputError("contrastive loss needs a batch of at least 2 (no negatives)")
    u, nu = _normalize(z)
    v, nv = _normalize(z_pos)
    if isinstance(family, NTXent):
        loss, g_u, g_v = _ntxent(u, v, family.tau)
    elif isinstance(family, GenericContrastive):
        loss, g_u, g_v = _generic(u, v, family)
    else:
        raise InvalidInputError(f"unknown contrastive family {family!r}")
    return loss, _normalize_vjp(u, nu, g_u), _normalize_vjp(v, nv, g_v)


# ---------------------------------------------------------------------------
# checkpoint
# ---------------------------------------------------------------------------


def checkpoint_bytes(model: EncoderModel) -> bytes:
    """Little-endian layout::

        b"HYPH" | u32 version | u32 L | u32 dims[L+1] | u8 activation[L]
        | f64 params...   (W row-major then b, per layer, then head W, b)

    Activation codes: 0 identity, 1 relu.
    """
    dims = [model.input_dim] + [l.weight.shape[1] for l in model.layers]
    out = [CKPT_MAGIC, struct.pack("<II", CKPT_VERSION, len(model.layers)),
           struct.pack(f"<{len(dims)}I", *dims),
           bytes(ACTIVATIONS.index(l.activation) for l in model.layers)]
    for p in model.params():
        out.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return b"".join(out)


def model_from_bytes(data: bytes) -> EncoderModel:
    if data[:4] != CKPT_MAGIC:
        raise InvalidInputError("not a checkpoint: bad magic bytes")
    version, n_layers = struct.unpack_from("<II", data, 4)
    if version != CKPT_VERSION:
        raise InvalidInputError(f"unsupported checkpoint version {version}")
    off = 12
    dims = struct.unpack_from(f"<{n_layers + 1}I", data, off)
    off += 4 * (n_layers + 1)
    acts = [ACTIVATIONS[c] for c in data[off:off + n_layers]]
    off += n_layers

    def take(shape):
        nonlocal off
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape)
        off += 8 * count
        return arr.astype(np.float64)

    try:
        layers = [Layer(take((a, b)), take((b,)), act) for a, b, act in zip(dims, dims[1:], acts)]
        head = Layer(take((dims[-1], 2)), take((2,)), "identity")
    except ValueError as exc:
        raise InvalidInputError(f"truncated checkpoint: {exc}") from None
    if off != len(data):
        raise InvalidInputError("checkpoint has trailing bytes")
    return EncoderModel(layers, head)
