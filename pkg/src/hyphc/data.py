"""Synthetic datasets with a planted two-level hierarchy."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

SUPER_RADIUS = 10.0
SUB_RADIUS = 3.0


def _unit_rows(rng, count, dim):
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def planted_two_level(supers: int = 4, subs: int = 4, per_cluster: int = 8, dim: int = 16,
                      seed: int = 0):
    """Hierarchical Gaussian mixture.

    Supercluster means lie on a sphere of radius 10, subcluster means are
    offset from them by radius 3, and samples have unit variance. Returns
    ``(features, labels)`` with ``label = super * subs + sub``; rows are
    grouped by label.
    """
    if min(supers, subs, per_cluster) < 1 or dim < 2:
        raise InvalidInputError("need supers, subs, per_cluster >= 1 and dim >= 2")
    rng = np.random.default_rng(seed)
    super_means = SUPER_RADIUS * _unit_rows(rng, supers, dim)
    sub_means = (np.repeat(super_means, subs, axis=0)
                 + SUB_RADIUS * _unit_rows(rng, supers * subs, dim))
    labels = np.repeat(np.arange(supers * subs), per_cluster)
    features = sub_means[labels] + rng.standard_normal((len(labels), dim))
    return features, labels
