import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyphc.errors import InvalidInputError
from hyphc.similarity import (
    SimilarityGraph,
    all_triplets,
    build_similarity,
    default_triplet_budget,
    sample_triplets,
)


def test_cosine_identical_rows():
    g = build_similarity(np.array([[1.0, 2.0], [1.0, 2.0]]))
    assert g.weights[0, 1] == pytest.approx(1.0, abs=1e-15)


def test_cosine_orthogonal_rows():
    g = build_similarity(np.array([[1.0, 0.0], [0.0, 3.0]]))
    assert g.weights[0, 1] == 0.5


def test_rbf_unit_sigma():
    g = build_similarity(np.array([[0.0, 0.0], [1.0, 0.0]]), kind="rbf", sigma=1.0)
    assert g.weights[0, 1] == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert g.weights[0, 1] == pytest.approx(0.606531, abs=1e-6)


def test_cosine_zero_row_named():
    with pytest.raises(InvalidInputError, match="row 2"):
        build_similarity(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]))


def test_unknown_kind():
    with pytest.raises(InvalidInputError):
        build_similarity(np.eye(3), kind="dot")


@given(st.integers(2, 12), st.integers(1, 6), st.integers(0, 2**32 - 1), st.sampled_from(["cosine", "rbf"]))
def test_graph_invariants(n, d, seed, kind):
    z = np.random.default_rng(seed).standard_normal((n, d))
    w = build_similarity(z, kind=kind).weights
    assert np.array_equal(w, w.T)
    assert np.all(np.diag(w) == 0)
    assert w.min() >= 0 and w.max() <= 1


def test_graph_is_immutable():
    g = build_similarity(np.eye(3) + 0.1)
    with pytest.raises(ValueError):
        g.weights[0, 1] = 0.3


@pytest.mark.parametrize("w", [
    [[0, 0.5], [0.4, 0]],
    [[0.1, 0.5], [0.5, 0]],
    [[0, 1.5], [1.5, 0]],
    [[0, np.nan], [np.nan, 0]],
    [[0, 1, 0]],
])
def test_graph_validation(w):
    with pytest.raises(InvalidInputError):
        SimilarityGraph(np.array(w, dtype=float))


def test_from_edges():
    g = SimilarityGraph.from_edges(3, [(0, 1, 0.2), (2, 1, 0.7)])
    assert g.weights[1, 2] == g.weights[2, 1] == 0.7
    assert g.weights[0, 2] == 0.0
    with pytest.raises(InvalidInputError):
        SimilarityGraph.from_edges(3, [(0, 3, 0.2)])


def test_all_triplets_n4():
    assert all_triplets(4).tolist() == [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]


def test_all_triplets_n10():
    t = sample_triplets(10, "all")
    assert len(t) == 120
    assert len({tuple(r) for r in t}) == 120
    assert np.all((t[:, 0] < t[:, 1]) & (t[:, 1] < t[:, 2]))


def test_uniform_reproducible():
    a = sample_triplets(100, "uniform", m=500, seed=7)
    b = sample_triplets(100, "uniform", m=500, seed=7)
    assert np.array_equal(a, b)
    assert len(a) == 500


def test_uniform_without_replacement_when_possible():
    t = sample_triplets(8, "uniform", m=56, seed=1)
    assert len({tuple(r) for r in t}) == 56
    t = sample_triplets(20, "uniform", m=300, seed=2)
    assert len({tuple(r) for r in t}) == 300
    assert np.all((t[:, 0] < t[:, 1]) & (t[:, 1] < t[:, 2]) & (t[:, 2] < 20))


def test_uniform_oversampling_draws_with_replacement():
    t = sample_triplets(4, "uniform", m=10, seed=0)
    assert len(t) == 10


def test_uniform_is_roughly_uniform():
    t = sample_triplets(6, "uniform", m=20, seed=3)
    # every canonical triplet reachable; sampled set is a subset of all triplets
    allset = {tuple(r) for r in all_triplets(6)}
    assert {tuple(r) for r in t} == allset


@pytest.mark.parametrize("n", [0, 1, 2])
def test_triplets_need_three_points(n):
    with pytest.raises(InvalidInputError):
        sample_triplets(n)


def test_uniform_needs_positive_m():
    with pytest.raises(InvalidInputError):
        sample_triplets(5, "uniform", m=0)


def test_default_budget():
    assert default_triplet_budget(128) is None
    assert default_triplet_budget(256) == math.ceil(20 * 256 * 8)
