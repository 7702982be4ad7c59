"""Obstacle segmentation: DBSCAN over GRF clouds, one bounding box per cluster.

Neighbor queries run against a uniform grid of cell size eps, so only the
27-cell neighborhood of a point is ever scanned.  Cluster expansion follows
ascending point index with FIFO seed order, which pins down the otherwise
order-dependent border-point assignment.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from navi.frame_ingest import GRF, PointCloud

NOISE = -1

_CELL_OFFSETS = np.array(
    [[dx, dy, dz] for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)],
    dtype=np.int64,
)


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 0.3
    min_pts: int = 8

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


@dataclass(frozen=True, eq=False)
class ClusterLabeling:
    """Per-point labels: -1 noise, 0..n_clusters-1 cluster ids."""

    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max(initial=-1)) + 1

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


@dataclass(frozen=True, eq=False)
class Aabb:
    """Axis-aligned bounding box in meters."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64).reshape(3)
        hi = np.asarray(self.max, dtype=np.float64).reshape(3)
        if np.any(lo > hi):
            raise ValueError("box min must be <= max componentwise")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @classmethod
    def from_points(cls, pts: np.ndarray) -> "Aabb":
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
        if pts.shape[0] == 0:
            raise ValueError("cannot bound an empty point set")
        return cls(pts.min(axis=0), pts.max(axis=0))

    @property
    def center(self) -> np.ndarray:
        return (self.min + self.max) / 2.0

    @property
    def size(self) -> np.ndarray:
        return self.max - self.min


def _neighbor_lists(pts: np.ndarray, eps: float) -> list[np.ndarray]:
    """Sorted eps-neighbor index lists (self included) for every point."""
    n = pts.shape[0]
    keys = np.floor(pts / eps).astype(np.int64)
    cells: dict[tuple, np.ndarray] = {}
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    sk = keys[order]
    breaks = np.flatnonzero(np.any(np.diff(sk, axis=0) != 0, axis=1)) + 1
    for chunk in np.split(order, breaks):
        cells[tuple(keys[chunk[0]])] = np.sort(chunk)

    eps2 = eps * eps
    neighbors: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for key, members in cells.items():
        cand_parts = []
        base = np.array(key, dtype=np.int64)
        for off in _CELL_OFFSETS:
            got = cells.get(tuple(base + off))
            if got is not None:
                cand_parts.append(got)
        cand = np.sort(np.concatenate(cand_parts))
        # one distance matrix per cell covers all of the cell's members
        d2 = np.sum((pts[members, None, :] - pts[None, cand, :]) ** 2, axis=2)
        within = d2 <= eps2
        for row, i in enumerate(members):
            neighbors[i] = cand[within[row]]
    return neighbors


def dbscan(cloud: PointCloud, params: DbscanParams = DbscanParams()) -> ClusterLabeling:
    """Standard DBSCAN with Euclidean distance and deterministic ordering."""
    if cloud.frame != GRF:
        raise ValueError("clustering expects a GRF cloud")
    n = len(cloud)
    if n == 0:
        return ClusterLabeling(np.zeros(0, dtype=np.int64))

    neighbors = _neighbor_lists(cloud.points, params.eps)
    UNVISITED = -2
    labels = np.full(n, UNVISITED, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != UNVISITED:
            continue
        if neighbors[i].shape[0] < params.min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cluster
        seeds = deque(neighbors[i])
        while seeds:
            j = seeds.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster  # border point reached by this core
            if labels[j] != UNVISITED:
                continue
            labels[j] = cluster
            jn = neighbors[j]
            if jn.shape[0] >= params.min_pts:
                seeds.extend(jn)
        cluster += 1
    return ClusterLabeling(labels)


def cluster_to_aabb(cloud: PointCloud, labeling: ClusterLabeling, label: int) -> Aabb:
    """Bounding box over exactly the points carrying ``label``."""
    members = labeling.members(label)
    if members.size == 0:
        raise ValueError(f"label {label} does not exist in this labeling")
    return Aabb.from_points(cloud.points[members])


def all_cluster_boxes(cloud: PointCloud, labeling: ClusterLabeling) -> list[Aabb]:
    """Boxes for every cluster, ascending label order. Noise is dropped."""
    return [cluster_to_aabb(cloud, labeling, k) for k in range(labeling.n_clusters)]
