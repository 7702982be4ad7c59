"""navi: obstacle avoidance and transit guidance from streamed depth frames."""

from navi.frame_ingest import (
    CAMERA,
    GRF,
    CameraIntrinsics,
    DepthFrame,
    HeadPose,
    PointCloud,
    back_project,
    transform_to_grf,
    voxel_downsample,
)

__all__ = [
    "CAMERA",
    "GRF",
    "CameraIntrinsics",
    "DepthFrame",
    "HeadPose",
    "PointCloud",
    "back_project",
    "transform_to_grf",
    "voxel_downsample",
]
