"""Density clustering (DBSCAN) and cluster centroids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .core import ConfigurationError, Point2, as_xy

NOISE = -1


@dataclass(frozen=True, eq=False)
class ClusterResult:
    labels: np.ndarray  # per point, NOISE or a dense cluster id
    clusters: list[list[int]]

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def partition(self) -> set[frozenset[int]]:
        return {frozenset(c) for c in self.clusters}


def eps_pairs(pts: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i < j) at Euclidean distance <= eps."""
    n = len(pts)
    if n <= 256:
        i, j = np.triu_indices(n, k=1)
    else:
        # Padded radius for candidates; the exact metric below decides.
        cand = cKDTree(pts).query_pairs(eps * (1 + 1e-9) + 1e-12, output_type="ndarray")
        if not len(cand):
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        i, j = cand[:, 0], cand[:, 1]
    d = pts[i] - pts[j]
    keep = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2) <= eps
    return i[keep].astype(np.int64), j[keep].astype(np.int64)


def dbscan(points, eps: float, min_pts: int) -> ClusterResult:
    """Classic DBSCAN over 2D points (neighbourhoods inclusive of eps and of the point itself).

    Equivalent to expanding clusters from core points in index order: cluster
    ids follow the smallest core index of each component, and a border point
    joins the lowest-id cluster among its core neighbours. Coincident points
    are collapsed and counted with multiplicity, which changes nothing in the
    result but helps a lot on depth clouds where a whole pixel column lands
    on one ground point.
    """
    if not eps > 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise ConfigurationError(f"min_pts must be >= 1, got {min_pts}")
    pts = as_xy(points)
    n = len(pts)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return ClusterResult(labels, [])

    uniq, inverse, weight = np.unique(pts, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    m = len(uniq)
    first = np.full(m, n, dtype=np.int64)
    np.minimum.at(first, inverse, np.arange(n))

    i, j = eps_pairs(uniq, eps)
    counts = weight + np.bincount(i, weights=weight[j], minlength=m) + np.bincount(j, weights=weight[i], minlength=m)
    core = counts >= min_pts
    core_idx = np.flatnonzero(core)
    if not len(core_idx):
        return ClusterResult(labels, [])

    both = core[i] & core[j]
    pos = np.full(m, -1, dtype=np.int64)
    pos[core_idx] = np.arange(len(core_idx))
    k = len(core_idx)
    rows, cols = pos[i[both]], pos[j[both]]
    order = np.argsort(rows, kind="stable")
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=k))])
    graph = csr_matrix((np.ones(len(rows)), cols[order], indptr), shape=(k, k))
    n_comp, comp = connected_components(graph, directed=False)
    # number components by their smallest original point index
    comp_first = np.full(n_comp, n, dtype=np.int64)
    np.minimum.at(comp_first, comp, first[core_idx])
    rank = np.empty(n_comp, dtype=np.int64)
    rank[np.argsort(comp_first)] = np.arange(n_comp)
    ulabels = np.full(m, NOISE, dtype=np.int64)
    ulabels[core_idx] = rank[comp]

    # border points: lowest cluster id among adjacent core points
    border_i = np.concatenate([i[core[j] & ~core[i]], j[core[i] & ~core[j]]])
    border_c = np.concatenate([ulabels[j[core[j] & ~core[i]]], ulabels[i[core[i] & ~core[j]]]])
    if len(border_i):
        order = np.lexsort((border_c, border_i))
        bi, bc = border_i[order], border_c[order]
        head = np.concatenate([[True], bi[1:] != bi[:-1]])
        ulabels[bi[head]] = bc[head]

    labels = ulabels[inverse]
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(n_comp + 1))
    clusters = [order[bounds[c] : bounds[c + 1]].tolist() for c in range(n_comp)]
    return ClusterResult(labels, clusters)


def centroid(points) -> Point2:
    pts = as_xy(points)
    if len(pts) == 0:
        raise ValueError("centroid of an empty cluster")
    return Point2(*pts.mean(axis=0))
