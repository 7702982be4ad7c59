"""Depth frame to global point cloud conversion.

Conventions used throughout the package:
  camera frame: +z along the optical axis, +x right, +y down (pinhole model)
  GRF (global reference frame): z-up, fixed at session start

Depth value 0.0 marks an invalid sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CAMERA = "camera"
GRF = "GRF"

# Long-throw-class sensors are unreliable outside this band.
DEFAULT_MIN_DEPTH = 0.25
DEFAULT_MAX_DEPTH = 7.5
DEFAULT_VOXEL_SIZE = 0.10


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera parameters, all in pixels."""

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True, eq=False)
class DepthFrame:
    """A timestamped grid of metric depth samples.

    ``depth`` is stored as a (height, width) float array; a flat row-major
    array of length width*height is accepted and reshaped.
    """

    timestamp: float
    depth: np.ndarray
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float32)
        h, w = self.intrinsics.height, self.intrinsics.width
        if d.size != w * h:
            raise ValueError(f"depth grid has {d.size} samples, expected {w * h}")
        d = d.reshape(h, w)
        if not np.all(np.isfinite(d)):
            raise ValueError("depth values must be finite")
        if np.any(d < 0):
            raise ValueError("depth values must be >= 0")
        object.__setattr__(self, "depth", d)


@dataclass(frozen=True, eq=False)
class HeadPose:
    """Rigid transform from camera frame to GRF."""

    rotation: np.ndarray
    translation: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        _check_rotation(r)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def inverse(self) -> "HeadPose":
        rt = self.rotation.T
        return HeadPose(rt, -rt @ self.translation, self.timestamp)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """A set of 3D points tagged with the frame they live in."""

    points: np.ndarray
    frame: str = CAMERA

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if p.size and not np.all(np.isfinite(p)):
            raise ValueError("point coordinates must be finite")
        if self.frame not in (CAMERA, GRF):
            raise ValueError(f"unknown frame tag {self.frame!r}")
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return self.points.shape[0]


def _check_rotation(r: np.ndarray, tol: float = 1e-6) -> None:
    if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
        raise ValueError("rotation matrix is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise ValueError("rotation matrix determinant is not +1")


def back_project(
    frame: DepthFrame,
    min_depth: float = DEFAULT_MIN_DEPTH,
    max_depth: float = DEFAULT_MAX_DEPTH,
) -> PointCloud:
    """Convert a depth frame into a camera-frame point cloud.

    A pixel (u, v) with depth d in (min_depth, max_depth] emits the point
    ((u - cx) * d / fx, (v - cy) * d / fy, d).  Invalid (0.0) and
    out-of-range samples emit nothing.  Output keeps row-major pixel order.
    """
    if not (min_depth >= 0 and max_depth > min_depth):
        raise ValueError("need 0 <= min_depth < max_depth")
    intr = frame.intrinsics
    if frame.depth.size != intr.width * intr.height:
        raise ValueError("depth grid does not match intrinsics")

    d = frame.depth.astype(np.float64)
    valid = (d > min_depth) & (d <= max_depth)
    u, v = np.meshgrid(np.arange(intr.width), np.arange(intr.height))
    dv = d[valid]
    pts = np.stack(
        [
            (u[valid] - intr.cx) * dv / intr.fx,
            (v[valid] - intr.cy) * dv / intr.fy,
            dv,
        ],
        axis=1,
    )
    return PointCloud(pts, CAMERA)


def transform_to_grf(cloud: PointCloud, pose: HeadPose) -> PointCloud:
    """Rigidly transform a camera-frame cloud into the GRF."""
    if cloud.frame != CAMERA:
        raise ValueError("cloud is not in the camera frame")
    _check_rotation(pose.rotation)
    pts = cloud.points @ pose.rotation.T + pose.translation
    return PointCloud(pts, GRF)


def voxel_downsample(cloud: PointCloud, voxel_size: float = DEFAULT_VOXEL_SIZE) -> PointCloud:
    """Collapse each occupied voxel to the centroid of its member points.

    Cells are axis-aligned cubes of side ``voxel_size`` anchored at the
    origin.  Output order is sorted by voxel key, so the result is
    deterministic and idempotent.
    """
    if voxel_size <= 0:
        raise ValueError("voxel_size must be positive")
    pts = cloud.points
    if len(cloud) == 0:
        return PointCloud(pts.copy(), cloud.frame)

    keys = np.floor(pts / voxel_size).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    sums = np.zeros((uniq.shape[0], 3))
    np.add.at(sums, inverse, pts)
    counts = np.bincount(inverse, minlength=uniq.shape[0]).astype(np.float64)
    return PointCloud(sums / counts[:, None], cloud.frame)
