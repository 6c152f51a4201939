"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line (also collected into the pytest
terminal summary) and then asserts. Run standalone for just the lines:

    python tests/test_acceptance.py
"""

import json
import time

import numpy as np
import pytest

from hyphc import cli, io
from hyphc.hyp_hc import HcLossConfig, hc_loss, hc_loss_backward
from hyphc.nn import NTXent, contrastive_loss, forward, init_encoder, ntxent_as_generic
from hyphc.oracle import best_tree_exhaustive, dasgupta_cost_naive, finite_diff, relative_error
from hyphc.similarity import SimilarityGraph, sample_triplets
from hyphc.train import TrainConfig, fit, fit_embeddings, joint_step_gradients
from hyphc.tree import Dendrogram, dasgupta_cost, decode, dendrogram_purity, from_newick, to_newick

from conftest import random_graph_weights, report_criterion

GRAD_TOL = 1e-4
N_GRAD = 200


def _lca_safe(emb, min_cross=1e-3):
    # reject configurations within reach of the through-origin kink
    n = len(emb)
    for i in range(n):
        for j in range(i + 1, n):
            cross = emb[i, 0] * emb[j, 1] - emb[i, 1] * emb[j, 0]
            if abs(cross) < min_cross and emb[i] @ emb[j] <= 0:
                return False
    return True


def _hc_instance(rng):
    while True:
        n = int(rng.integers(3, 11))
        ang = rng.uniform(0, 2 * np.pi, n)
        rad = rng.uniform(0.05, 0.9, n)
        emb = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        if _lca_safe(emb):
            return emb, SimilarityGraph(random_graph_weights(rng, n)), sample_triplets(n), HcLossConfig(
                tau=float(rng.uniform(0.05, 1.0)))


def _model_instance(rng):
    d_in = int(rng.integers(2, 7))
    latent = int(rng.integers(2, 9))
    hidden = tuple(int(h) for h in rng.integers(2, 9, int(rng.integers(1, 3))))
    model = init_encoder(d_in, hidden, latent, rng=rng)
    model = model.with_params([p + 0.1 * rng.standard_normal(p.shape) for p in model.params()])
    n = int(rng.integers(4, 11))
    x = rng.standard_normal((n, d_in))
    return model, x


def test_criterion_1_gradient_correctness():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    errs = {"hc": [], "contrastive": [], "model": []}

    for _ in range(N_GRAD):
        emb, g, trip, cfg = _hc_instance(rng)
        errs["hc"].append(relative_error(hc_loss_backward(emb, g, trip, cfg),
                                         finite_diff(lambda e: hc_loss(e, g, trip, cfg), emb)))

    for _ in range(N_GRAD):
        b, d = int(rng.integers(2, 11)), int(rng.integers(1, 9))
        z, zp = rng.standard_normal((b, d)), rng.standard_normal((b, d))
        fam = NTXent(float(rng.uniform(0.1, 1.0)))
        _, gz, gp = contrastive_loss(z, zp, fam)
        ez = relative_error(gz, finite_diff(lambda a: contrastive_loss(a, zp, fam)[0], z))
        ep = relative_error(gp, finite_diff(lambda a: contrastive_loss(z, a, fam)[0], zp))
        errs["contrastive"].append(max(ez, ep))

    # full model: the joint objective, contrastive on two views plus HC on the batch
    train_cfg = TrainConfig()
    for _ in range(N_GRAD):
        while True:
            model, x = _model_instance(rng)
            if _lca_safe(forward(model, x)[1]):
                break
        n = len(x)
        v1 = x + 0.3 * rng.standard_normal(x.shape)
        v2 = x + 0.3 * rng.standard_normal(x.shape)
        graph = SimilarityGraph(random_graph_weights(rng, n))
        trip = sample_triplets(n)
        hc_cfg = HcLossConfig(tau=float(rng.uniform(0.1, 1.0)))
        lam_ct, lam_hc = rng.uniform(0.2, 1.0, 2)
        _, _, grads, _, _ = joint_step_gradients(model, v1, v2, x, graph, trip, train_cfg, hc_cfg, lam_ct, lam_hc)
        params = model.params()

        def objective(ps):
            m = model.with_params(ps)
            ct = contrastive_loss(forward(m, v1)[0], forward(m, v2)[0], NTXent(train_cfg.tau_c))[0] / n
            hc = hc_loss(forward(m, x)[1], graph, trip, hc_cfg) / len(trip)
            return lam_ct * ct + lam_hc * hc

        worst = 0.0
        for idx, p in enumerate(params):
            def f(value, idx=idx):
                ps = list(params)
                ps[idx] = value
                return objective(ps)
            worst = max(worst, relative_error(grads[idx], finite_diff(f, p)))
        errs["model"].append(worst)

    elapsed = time.perf_counter() - t0
    passed = {k: sum(e <= GRAD_TOL for e in v) for k, v in errs.items()}
    ok = all(p == N_GRAD for p in passed.values()) and elapsed < 60
    detail = ", ".join(f"{k} {passed[k]}/{N_GRAD} (max rel err {max(errs[k]):.1e})" for k in errs)
    report_criterion(1, "gradients vs finite differences", ok, f"{detail}; {elapsed:.1f} s (limit 60 s)")
    assert ok


def test_criterion_2_oracle_near_optimality():
    t0 = time.perf_counter()
    gaps = []
    hc = HcLossConfig(tau=0.1, anneal_factor=0.5, anneal_every=50)
    for s in range(20):
        rng = np.random.default_rng(1000 + s)
        graph = SimilarityGraph(random_graph_weights(rng, 6))
        emb, _ = fit_embeddings(graph, hc, epochs=300, learning_rate=0.05, seed=s)
        cost = dasgupta_cost(decode(emb), graph)
        _, best = best_tree_exhaustive(graph)
        gaps.append((cost - best) / best)
    elapsed = time.perf_counter() - t0
    median = float(np.median(gaps))
    ok = median <= 0.05 and min(gaps) >= -1e-12 and elapsed < 120
    report_criterion(2, "oracle near-optimality (n=6, 20 graphs)", ok,
                     f"median gap {median:.2%} (limit 5%), min gap {min(gaps):.2%}, "
                     f"max gap {max(gaps):.2%}; {elapsed:.1f} s (limit 120 s)")
    assert ok


def test_criterion_3_planted_hierarchy(tmp_path):
    path = tmp_path / "planted.csv"
    assert cli.main(["gen", "--preset", "planted2level", "--supers", "4", "--subs", "4",
                     "--per-cluster", "8", "--dim", "16", "--seed", "0", "--out", str(path)]) == 0
    x, labels = io.read_features(path)
    t0 = time.perf_counter()
    _, emb, _ = fit(x, TrainConfig())
    tree = decode(emb)
    elapsed = time.perf_counter() - t0
    sub = dendrogram_purity(tree, labels)
    sup = dendrogram_purity(tree, labels // 4)
    ok = sub >= 0.90 and sup >= 0.90 and elapsed < 300
    report_criterion(3, "planted hierarchy recovery (default config)", ok,
                     f"subcluster purity {sub:.3f}, supercluster purity {sup:.3f} (both need >= 0.90); "
                     f"{elapsed:.1f} s (limit 300 s)")
    assert ok


def test_criterion_4_reduction_identities(tmp_path):
    from hyphc.data import planted_two_level

    x, _ = planted_two_level()
    epochs = 30
    no_hc = fit(x, TrainConfig(lambda_hc=0.0, epochs=epochs, warmup_epochs=0))
    ct_only = fit(x, TrainConfig(epochs=epochs, warmup_epochs=epochs))
    diffs = [abs(a["loss_ct"] - b["loss_ct"]) for a, b in zip(no_hc[2].epochs, ct_only[2].epochs)]
    param_diff = max(float(np.max(np.abs(a - b))) for a, b in zip(no_hc[0].params(), ct_only[0].params()))
    identity_ok = len(diffs) == epochs and max(diffs) <= 1e-12 and param_diff <= 1e-12

    monotone = 0
    for seed in range(20):
        cfg = TrainConfig(lambda_ct=0.0, freeze_encoder=True, warmup_epochs=0, epochs=60, seed=seed)
        losses = np.array([e["loss_hc"] for e in fit(x, cfg)[2].epochs])
        monotone += bool(np.all(np.diff(losses) <= 0.0))
    ok = identity_ok and monotone >= 18
    report_criterion(4, "reduction identities", ok,
                     f"lambda_hc=0 vs contrastive-only: max epoch loss diff {max(diffs):.1e}, "
                     f"max param diff {param_diff:.1e} (limit 1e-12); frozen-encoder HC loss "
                     f"non-increasing in {monotone}/20 seeds (need 18)")
    assert ok


def test_criterion_5_loss_family_identity():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        b, d = int(rng.integers(2, 17)), int(rng.integers(2, 17))
        tau = float(rng.uniform(0.05, 2.0))
        z = rng.standard_normal((b, d))
        zp = rng.standard_normal((b, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        zp /= np.linalg.norm(zp, axis=1, keepdims=True)
        a = contrastive_loss(z, zp, NTXent(tau))
        g = contrastive_loss(z, zp, ntxent_as_generic(tau))
        worst = max(worst, abs(a[0] - g[0]), float(np.max(np.abs(a[1] - g[1]))),
                    float(np.max(np.abs(a[2] - g[2]))))
    ok = worst <= 1e-10
    report_criterion(5, "ntxent equals generic(log1p, exp(x/2tau))", ok,
                     f"max abs diff over 50 batches {worst:.1e} (limit 1e-10)")
    assert ok


def _valid(tree, n):
    ch = tree.children
    return (tree.n_leaves == n and ch.shape == (n - 1, 2)
            and sorted(ch.ravel().tolist()) == list(range(2 * n - 2))
            and bool(np.all(ch < (n + np.arange(n - 1))[:, None]))
            and tree.leaf_counts[tree.root] == n)


def _tied_embeddings(rng, n):
    kind = int(rng.integers(5))
    if kind == 0:  # duplicates of a few points
        base = rng.uniform(-0.6, 0.6, (int(rng.integers(1, 4)), 2))
        return base[rng.integers(0, len(base), n)]
    if kind == 1:  # points on one diameter
        return np.column_stack([rng.choice([-0.5, -0.2, 0.2, 0.5], n), np.zeros(n)])
    if kind == 2:  # regular ring: all neighbours tie
        ang = 2 * np.pi * np.arange(n) / n
        return 0.7 * np.column_stack([np.cos(ang), np.sin(ang)])
    if kind == 3:  # coarse grid including the origin
        return rng.choice([-0.5, 0.0, 0.5], (n, 2))
    return np.zeros((n, 2))


def test_criterion_6_structural_invariants():
    rng = np.random.default_rng(6)
    valid = 0
    for case in range(10_000):
        n = int(rng.integers(2, 21))
        if case % 2:
            emb = _tied_embeddings(rng, n)
        else:
            ang = rng.uniform(0, 2 * np.pi, n)
            rad = np.sqrt(rng.uniform(0, 0.999, n))
            emb = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        valid += _valid(decode(emb), n)

    round_trips = 0
    for _ in range(100):
        n = int(rng.integers(2, 33))
        tree = decode(rng.uniform(-0.7, 0.7, (n, 2)))
        # shuffle leaf labels so trees are not tied to decode's ordering
        perm = rng.permutation(n)
        relabelled = np.where(tree.children < n, perm[np.minimum(tree.children, n - 1)], tree.children)
        tree = Dendrogram(n, relabelled)
        back = from_newick(to_newick(tree))
        round_trips += back == tree and back.structure() == tree.structure()

    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 13))
        tree = decode(rng.uniform(-0.7, 0.7, (n, 2)))
        graph = SimilarityGraph(random_graph_weights(rng, n))
        worst = max(worst, abs(dasgupta_cost(tree, graph) - dasgupta_cost_naive(tree, graph)))

    ok = valid == 10_000 and round_trips == 100 and worst <= 1e-12
    report_criterion(6, "structural invariants", ok,
                     f"valid decodes {valid}/10000, Newick round-trips {round_trips}/100, "
                     f"max |cost - naive| {worst:.1e} (limit 1e-12)")
    assert ok


def test_criterion_7_cli_determinism(tmp_path):
    data = tmp_path / "planted.csv"
    assert cli.main(["gen", "--seed", "0", "--out", str(data)]) == 0
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["fit", "--input", str(data), "--seed", "0", "--out", str(out)]) == 0
        runs.append({f: (out / f).read_bytes() for f in ("metrics.json", "tree.newick")})
    same = {f: runs[0][f] == runs[1][f] for f in runs[0]}
    ok = all(same.values())
    report_criterion(7, "cmd_fit determinism", ok,
                     ", ".join(f"{f} {'identical' if v else 'DIFFERS'}" for f, v in same.items()))
    assert ok


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            kwargs = {}
            if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                kwargs["tmp_path"] = Path(tempfile.mkdtemp())
            try:
                fn(**kwargs)
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
