"""Horizontal floor plane fitting and removal.

Fitting happens in the GRF, where "horizontal" has a fixed meaning,
so candidate planes can be rejected by tilt before counting inliers.
That keeps the fit from locking onto tabletops or walls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from navi.frame_ingest import GRF, PointCloud

# How many candidate planes are inlier-scored per vectorized batch;
# bounds the N x iterations distance matrix.
_SCORE_CHUNK = 64


@dataclass(frozen=True, eq=False)
class PlaneModel:
    """Plane {p : normal . p = offset} with its supporting inlier count."""

    normal: np.ndarray
    offset: float
    inlier_count: int

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        off = float(self.offset)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("plane normal must be nonzero")
        if abs(norm - 1.0) > 1e-9:
            n, off = n / norm, off / norm
        if n[2] < 0:
            n, off = -n, -off
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", off)

    def distances(self, points: np.ndarray) -> np.ndarray:
        return np.abs(points @ self.normal - self.offset)


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 200
    inlier_threshold: float = 0.05
    horizontality_max_tilt: float = 10.0
    min_inlier_fraction: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if not (0 < self.horizontality_max_tilt < 90):
            raise ValueError("horizontality_max_tilt must be in (0, 90)")
        if not (0 <= self.min_inlier_fraction <= 1):
            raise ValueError("min_inlier_fraction must be in [0, 1]")


def fit_floor(cloud: PointCloud, params: RansacParams = RansacParams()) -> PlaneModel | None:
    """Fit the floor plane with seeded RANSAC over 3-point samples.

    Candidates tilted more than ``horizontality_max_tilt`` from +Z are
    discarded before inlier counting.  The winning candidate is refined by a
    least-squares fit over its inliers.  Returns None when no admissible
    plane reaches ``min_inlier_fraction``, or when the cloud has fewer than
    3 points.
    """
    if cloud.frame != GRF:
        raise ValueError("floor fitting expects a GRF cloud")
    pts = cloud.points
    n = pts.shape[0]
    if n < 3:
        return None

    rng = np.random.default_rng(params.seed)
    idx = rng.integers(0, n, size=(params.iterations, 3))
    p1, p2, p3 = pts[idx[:, 0]], pts[idx[:, 1]], pts[idx[:, 2]]
    normals = np.cross(p2 - p1, p3 - p1)
    norms = np.linalg.norm(normals, axis=1)
    ok = norms > 1e-12  # degenerate samples (collinear or repeated points)
    min_nz = np.cos(np.radians(params.horizontality_max_tilt))
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = np.where(ok[:, None], normals / np.where(ok, norms, 1.0)[:, None], 0.0)
    flip = normals[:, 2] < 0
    normals[flip] = -normals[flip]
    ok &= normals[:, 2] >= min_nz
    if not np.any(ok):
        return None

    cand_normals = normals[ok]
    cand_offsets = np.einsum("ij,ij->i", cand_normals, p1[ok])

    best_count, best_i = 0, -1
    for start in range(0, cand_normals.shape[0], _SCORE_CHUNK):
        nn = cand_normals[start : start + _SCORE_CHUNK]
        off = cand_offsets[start : start + _SCORE_CHUNK]
        dists = np.abs(pts @ nn.T - off)
        counts = np.count_nonzero(dists <= params.inlier_threshold, axis=0)
        i = int(np.argmax(counts))
        if counts[i] > best_count:
            best_count, best_i = int(counts[i]), start + i

    if best_i < 0 or best_count / n < params.min_inlier_fraction:
        return None

    raw = PlaneModel(cand_normals[best_i], float(cand_offsets[best_i]), best_count)
    refined = _least_squares_plane(pts[raw.distances(pts) <= params.inlier_threshold])
    if refined is None or refined.normal[2] < min_nz:
        plane = raw
    else:
        plane = refined
    count = int(np.count_nonzero(plane.distances(pts) <= params.inlier_threshold))
    return PlaneModel(plane.normal, plane.offset, count)


def _least_squares_plane(pts: np.ndarray) -> PlaneModel | None:
    if pts.shape[0] < 3:
        return None
    centroid = pts.mean(axis=0)
    _, s, vt = np.linalg.svd(pts - centroid, full_matrices=False)
    if s[-2] < 1e-12:  # inliers nearly collinear, normal is ill-defined
        return None
    normal = vt[-1]
    return PlaneModel(normal, float(normal @ centroid), pts.shape[0])


def split_floor(
    cloud: PointCloud, plane: PlaneModel, threshold: float
) -> tuple[PointCloud, PointCloud]:
    """Partition a GRF cloud into (floor, rest) by distance to the plane."""
    if cloud.frame != GRF:
        raise ValueError("floor split expects a GRF cloud")
    mask = plane.distances(cloud.points) <= threshold
    return (
        PointCloud(cloud.points[mask], GRF),
        PointCloud(cloud.points[~mask], GRF),
    )
