"""Joint contrastive + hierarchical-clustering training.

Each component loss is normalised before weighting: the contrastive sum by
the batch size, the HC sum by the number of triplets.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidInputError, NonFiniteLossError
from .geometry import project_to_disk, project_to_disk_vjp
from .hyp_hc import HcLossConfig, anneal, hc_loss_and_grad
from .nn import (AugmentationConfig, EncoderModel, NTXent, augment, backward,
                 contrastive_loss, forward, init_encoder)
from .similarity import (SimilarityGraph, build_similarity, default_triplet_budget,
                         sample_triplets)


@dataclass(frozen=True)
class TrainConfig:
    lambda_ct: float = 1.0
    lambda_hc: float = 1.0
    epochs: int = 200
    warmup_epochs: int = 20
    batch_size: int | None = None  # None -> min(n, 64)
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    tau_c: float = 0.5
    triplets: str | int = "auto"  # "auto", "all", or a per-epoch sample count
    similarity: str = "cosine"
    rbf_sigma: float = 1.0
    hidden: tuple[int, ...] = (64, 64)
    latent_dim: int = 16
    freeze_encoder: bool = False
    seed: int = 0
    hc: HcLossConfig = field(default_factory=HcLossConfig)
    augment: AugmentationConfig = field(default_factory=AugmentationConfig)

    def validate(self) -> None:
        problems = []
        if self.lambda_ct < 0 or self.lambda_hc < 0:
            problems.append("lambda_ct and lambda_hc must be >= 0")
        if not self.lambda_ct + self.lambda_hc > 0:
            problems.append("lambda_ct + lambda_hc must be > 0")
        if not self.epochs >= self.warmup_epochs >= 0:
            problems.append("need epochs >= warmup_epochs >= 0")
        if self.batch_size is not None and self.batch_size < 2:
            problems.append("batch_size must be >= 2")
        if not self.learning_rate >= 0:
            problems.append("learning_rate must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or not self.adam_eps > 0:
            problems.append("need 0 <= beta1, beta2 < 1 and adam_eps > 0")
        if not self.tau_c > 0:
            problems.append("tau_c must be > 0")
        if self.similarity not in ("cosine", "rbf"):
            problems.append(f"unknown similarity {self.similarity!r}")
        if not (self.triplets in ("auto", "all")
                or (isinstance(self.triplets, int) and not isinstance(self.triplets, bool)
                    and self.triplets >= 1)):
            problems.append("triplets must be 'auto', 'all' or a positive integer")
        if self.latent_dim < 1 or any(h < 1 for h in self.hidden):
            problems.append("layer widths must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        """Build from a nested mapping, rejecting unknown keys."""
        raw = dict(raw)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        try:
            for key, sub in (("hc", HcLossConfig), ("augment", AugmentationConfig)):
                if key in raw:
                    if not isinstance(raw[key], dict):
                        raise ConfigError(f"[{key}] must be a table")
                    sub_known = {f.name for f in dataclasses.fields(sub)}
                    bad = sorted(set(raw[key]) - sub_known)
                    if bad:
                        raise ConfigError(f"unknown config key(s) in [{key}]: {', '.join(bad)}")
                    raw[key] = sub(**raw[key])
            if "hidden" in raw:
                raw["hidden"] = tuple(int(h) for h in raw["hidden"])
            cfg = cls(**raw)
        except (TypeError, InvalidInputError) as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg


def joint_loss(l_ct: float, l_hc: float, cfg: TrainConfig) -> float:
    return cfg.lambda_ct * l_ct + cfg.lambda_hc * l_hc


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    t: int
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def zeros(cls, params) -> "AdamState":
        return cls(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update. Returns new ``(params, state)``."""
    if len(params) != len(grads):
        raise InvalidInputError("params and grads differ in length")
    t = state.t + 1
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise InvalidInputError(f"gradient shape {g.shape} does not match {p.shape}")
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        new_p.append(p - lr * (m / bc1) / (np.sqrt(v / bc2) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(t, new_m, new_v)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    epochs: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    input_hash: str = ""

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "input_hash": self.input_hash,
                           "epochs": self.epochs}, indent=2)


def content_hash(data: np.ndarray) -> str:
    """Git blob hash of the float64 little-endian bytes of ``data``."""
    raw = np.ascontiguousarray(data, dtype="<f8").tobytes()
    return hashlib.sha1(b"blob %d\0" % len(raw) + raw).hexdigest()


def _check_finite(value: float, epoch: int, term: str) -> None:
    if not math.isfinite(value):
        raise NonFiniteLossError(epoch, term, value)


def joint_step_gradients(model: EncoderModel, view1, view2, full, graph: SimilarityGraph,
                         triplets, cfg: TrainConfig, hc_cfg: HcLossConfig,
                         lambda_ct: float, lambda_hc: float):
    """Losses and parameter gradients for one optimisation step.

    Returns ``(l_ct, l_hc, grads, ct_grads, hc_grads)`` where the normalised
    losses are ``l_ct = ct_sum / b`` and ``l_hc = hc_sum / T``, and
    ``grads = lambda_ct * ct_grads + lambda_hc * hc_grads``. A term whose
    weight is zero still reports its loss but contributes no gradient work.
    """
    b = len(view1)
    z1, _, tape1 = forward(model, view1)
    z2, _, tape2 = forward(model, view2)
    ct_sum, g1, g2 = contrastive_loss(z1, z2, NTXent(cfg.tau_c))
    l_ct = ct_sum / b
    zeros = [np.zeros_like(p) for p in model.params()]
    ct_grads = zeros
    if lambda_ct != 0.0:
        ga = backward(model, tape1, grad_latents=g1 / b)
        gb = backward(model, tape2, grad_latents=g2 / b)
        ct_grads = [x + y for x, y in zip(ga, gb)]

    hc_grads = zeros
    l_hc = 0.0
    if triplets is not None and len(triplets):
        _, emb, tape_full = forward(model, full)
        hc_sum, g_emb = hc_loss_and_grad(emb, graph, triplets, hc_cfg,
                                         want_grad=lambda_hc != 0.0)
        n_trip = len(triplets)
        l_hc = hc_sum / n_trip
        if lambda_hc != 0.0:
            hc_grads = backward(model, tape_full, grad_embeddings=g_emb / n_trip)

    grads = [lambda_ct * a + lambda_hc * c for a, c in zip(ct_grads, hc_grads)]
    return l_ct, l_hc, grads, ct_grads, hc_grads


def _triplet_sampler(n: int, cfg: TrainConfig, rng: np.random.Generator):
    """Callable returning the triplets for the next epoch (``None`` if n < 3)."""
    if n < 3:
        return lambda: None
    m = None
    if cfg.triplets == "auto":
        m = default_triplet_budget(n)
    elif cfg.triplets != "all":
        m = int(cfg.triplets)
    if m is None:
        fixed = sample_triplets(n, "all")
        return lambda: fixed
    return lambda: sample_triplets(n, "uniform", m=m, rng=rng)


def _batches(n: int, size: int, perm: np.ndarray):
    bounds = list(range(0, n, size))
    # fold a trailing singleton into the previous batch: it has no negatives
    if len(bounds) > 1 and n - bounds[-1] < 2:
        bounds.pop()
    ends = bounds[1:] + [n]
    return [perm[a:e] for a, e in zip(bounds, ends)]


def fit(data, cfg: TrainConfig | None = None, model: EncoderModel | None = None,
        progress=None):
    """Train encoder and embedding head; returns ``(model, embeddings, record)``.

    The first ``warmup_epochs`` epochs are contrastive-only. Each epoch
    rebuilds the similarity graph from the current (clean, detached) latents
    and samples triplets; each minibatch step then combines the contrastive
    gradient of two augmented views with the HC gradient of the full-data
    embeddings and takes one Adam step. ``progress`` is an optional callable
    receiving every epoch's record entry.
    """
    cfg = TrainConfig() if cfg is None else cfg
    cfg.validate()
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or len(x) < 4:
        raise InvalidInputError(f"fit needs an n x d dataset with n >= 4, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("dataset contains non-finite values")
    n = len(x)

    init_ss, shuffle_ss, trip_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    aug_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, cfg.augment.seed]))
    shuffle_rng = np.random.default_rng(shuffle_ss)
    trip_rng = np.random.default_rng(trip_ss)
    if model is None:
        model = init_encoder(x.shape[1], cfg.hidden, cfg.latent_dim, np.random.default_rng(init_ss))
    record = RunRecord(config=cfg.to_dict(), input_hash=content_hash(x))
    if cfg.epochs == 0:
        return model, forward(model, x)[1], record

    batch_size = min(n, 64) if cfg.batch_size is None else min(cfg.batch_size, n)
    n_enc = model.n_encoder_params()
    state = AdamState.zeros(model.params())
    next_triplets = _triplet_sampler(n, cfg, trip_rng)

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        warm = epoch < cfg.warmup_epochs
        lam_hc = 0.0 if warm else cfg.lambda_hc
        hc_cfg = anneal(cfg.hc, max(epoch - cfg.warmup_epochs, 0))

        latents, _, _ = forward(model, x)
        if not np.all(np.isfinite(latents)):
            raise NonFiniteLossError(epoch, "latents", float(np.sum(latents)))
        graph = build_similarity(latents, cfg.similarity, cfg.rbf_sigma)
        triplets = next_triplets()

        sums = np.zeros(3)
        batches = _batches(n, batch_size, shuffle_rng.permutation(n))
        for idx in batches:
            xb = x[idx]
            v1 = augment(xb, cfg.augment, aug_rng)
            v2 = augment(xb, cfg.augment, aug_rng)
            l_ct, l_hc, grads, _, _ = joint_step_gradients(
                model, v1, v2, x, graph, triplets, cfg, hc_cfg, cfg.lambda_ct, lam_hc)
            _check_finite(l_ct, epoch, "contrastive")
            _check_finite(l_hc, epoch, "hc")
            if cfg.freeze_encoder:
                grads[:n_enc] = [np.zeros_like(g) for g in grads[:n_enc]]
            params, state = adam_step(model.params(), grads, state, cfg.learning_rate,
                                      cfg.beta1, cfg.beta2, cfg.adam_eps)
            model = model.with_params(params)
            sums += (l_ct, l_hc, cfg.lambda_ct * l_ct + lam_hc * l_hc)

        mean = sums / len(batches)
        entry = {"epoch": epoch, "loss_ct": float(mean[0]), "loss_hc": float(mean[1]),
                 "loss_joint": float(mean[2]), "tau": hc_cfg.tau,
                 "wallclock_ms": (time.perf_counter() - t0) * 1e3}
        record.epochs.append(entry)
        if progress is not None:
            progress(entry)

    return model, forward(model, x)[1], record


def fit_embeddings(graph: SimilarityGraph, hc: HcLossConfig, epochs: int = 300,
                   learning_rate: float = 0.05, seed: int = 0, triplets=None,
                   init_scale: float = 0.1):
    """Optimise free disk embeddings for the HC loss alone.

    Trainable raw vectors are mapped through ``project_to_disk``; Adam on the
    raw vectors, one full-batch step per epoch with the annealed temperature.
    Returns ``(embeddings, per-epoch HC losses normalised by triplet count)``.
    """
    n = graph.n
    trip = sample_triplets(n, "all") if triplets is None else triplets
    rng = np.random.default_rng(seed)
    raw = init_scale * rng.standard_normal((n, 2))
    state = AdamState.zeros([raw])
    losses = []
    for epoch in range(epochs):
        emb = project_to_disk(raw)
        loss, g_emb = hc_loss_and_grad(emb, graph, trip, anneal(hc, epoch))
        losses.append(loss / len(trip))
        g_raw = project_to_disk_vjp(raw, g_emb / len(trip))
        (raw,), state = adam_step([raw], [g_raw], state, learning_rate)
    return project_to_disk(raw), losses
