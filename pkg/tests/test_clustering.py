from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_dbscan
from nlosloc.clustering import NOISE, centroid, dbscan, eps_pairs
from nlosloc.core import ConfigurationError, Point2


def test_empty_input():
    r = dbscan([], 0.5, 3)
    assert r.n_clusters == 0 and len(r.labels) == 0


def test_single_point_self_core():
    r = dbscan([(1.0, 2.0)], 0.5, 1)
    assert r.clusters == [[0]]


def test_two_separated_blobs():
    rng = np.random.default_rng(0)
    eps = 0.5
    a = rng.normal(0, 0.1, (20, 2))
    b = rng.normal(0, 0.1, (20, 2)) + (10 * eps, 0)
    pts = np.vstack([a, b])
    r = dbscan(pts, eps, 4)
    assert r.n_clusters == 2
    assert r.partition() == brute_dbscan(pts, eps, 4)[0]
    assert r.partition() == {frozenset(range(20)), frozenset(range(20, 40))}


def test_eps_is_inclusive():
    assert dbscan([(0, 0), (1, 0)], 1.0, 2).n_clusters == 1
    assert dbscan([(0, 0), (1, 0)], 0.999, 2).n_clusters == 0


def test_border_point_takes_lowest_cluster_in_scan_order():
    left = [(0.0, 0.0), (-0.3, 0.0), (-0.6, 0.0), (-0.9, 0.0)]
    right = [(2.0, 0.0), (2.3, 0.0), (2.6, 0.0), (2.9, 0.0)]
    border = [(1.0, 0.0)]
    r = dbscan(left + right + border, 1.0, 4)
    assert r.labels[8] == r.labels[0] == 0
    r = dbscan(right + left + border, 1.0, 4)
    assert r.labels[8] == r.labels[0] == 0  # now the right-hand group is cluster 0
    assert brute_dbscan(left + right + border, 1.0, 4)[1]  # the oracle flags the tie


def test_cluster_ids_follow_scan_order():
    pts = [(10, 0), (10, 0.1), (0, 0), (0, 0.1), (10, 0.2)]
    r = dbscan(pts, 0.5, 2)
    assert r.labels.tolist() == [0, 0, 1, 1, 0]
    assert r.clusters == [[0, 1, 4], [2, 3]]


def test_noise_label():
    r = dbscan([(0, 0), (0, 0.1), (5, 5)], 0.5, 2)
    assert r.labels.tolist() == [0, 0, NOISE]


def test_duplicates_match_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        pts = rng.integers(0, 6, (60, 2)).astype(float)
        for eps, m in ((1.0, 3), (1.5, 5), (0.5, 2)):
            part, amb = brute_dbscan(pts, eps, m)
            if not amb:
                assert dbscan(pts, eps, m).partition() == part


def test_large_input_uses_tree_path_and_matches_oracle():
    rng = np.random.default_rng(2)
    pts = np.vstack([rng.normal(c, 0.4, (150, 2)) for c in ((0, 0), (4, 0), (0, 5))])
    part, amb = brute_dbscan(pts, 0.35, 5)
    assert not amb
    assert dbscan(pts, 0.35, 5).partition() == part


def test_eps_pairs_agrees_between_paths():
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 10, (400, 2))
    i, j = eps_pairs(pts, 0.7)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    want = {(a, b) for a, b in zip(*np.nonzero(np.triu(d <= 0.7, k=1)))}
    assert set(zip(i.tolist(), j.tolist())) == want


def test_parameter_validation():
    with pytest.raises(ConfigurationError):
        dbscan([(0, 0)], 0.0, 2)
    with pytest.raises(ConfigurationError):
        dbscan([(0, 0)], 1.0, 0)


def test_centroid_examples():
    assert centroid([(0, 0), (2, 0)]) == Point2(1, 0)
    assert centroid([(1, 1)]) == Point2(1, 1)
    with pytest.raises(ValueError):
        centroid([])


def test_centroid_matches_summation():
    pts = np.random.default_rng(4).uniform(-100, 100, (100, 2))
    c = centroid(pts)
    assert abs(c.x - math.fsum(pts[:, 0]) / 100) <= 1e-12
    assert abs(c.y - math.fsum(pts[:, 1]) / 100) <= 1e-12


instances = st.tuples(
    st.integers(0, 2**32 - 1),
    st.integers(1, 80),
    st.floats(0.2, 2.0),
    st.integers(1, 6),
)


@settings(max_examples=100, deadline=None)
@given(instances)
def test_matches_oracle(inst):
    seed, n, eps, m = inst
    pts = np.random.default_rng(seed).uniform(0, 8, (n, 2))
    part, amb = brute_dbscan(pts, eps, m)
    if not amb:
        assert dbscan(pts, eps, m).partition() == part


@settings(max_examples=100, deadline=None)
@given(instances)
def test_permutation_robust(inst):
    seed, n, eps, m = inst
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 8, (n, 2))
    if brute_dbscan(pts, eps, m)[1]:
        return
    perm = rng.permutation(n)
    a = dbscan(pts, eps, m).partition()
    b = {frozenset(int(perm[i]) for i in c) for c in dbscan(pts[perm], eps, m).partition()}
    assert a == b


@settings(max_examples=100, deadline=None)
@given(instances)
def test_noise_points_are_not_reachable(inst):
    seed, n, eps, m = inst
    pts = np.random.default_rng(seed).uniform(0, 8, (n, 2))
    r = dbscan(pts, eps, m)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    counts = (d <= eps).sum(axis=1)
    core = counts >= m
    for i in np.flatnonzero(r.labels == NOISE):
        assert counts[i] < m
        assert not np.any(core & (d[i] <= eps))
