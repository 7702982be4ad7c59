import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

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


INTR_4X4 = CameraIntrinsics(width=4, height=4, fx=2.0, fy=2.0, cx=2.0, cy=2.0)


def rotation_from_seed(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def cloud_from_seed(seed: int, n: int = 50, scale: float = 5.0) -> PointCloud:
    rng = np.random.default_rng(seed)
    return PointCloud(rng.uniform(-scale, scale, size=(n, 3)), CAMERA)


class TestBackProject:
    def test_principal_point_ray(self):
        depth = np.zeros((4, 4), dtype=np.float32)
        depth[2, 2] = 2.0  # pixel exactly at (cx, cy)
        cloud = back_project(DepthFrame(0.0, depth, INTR_4X4), 0.0, 10.0)
        np.testing.assert_allclose(cloud.points, [[0.0, 0.0, 2.0]])

    def test_all_invalid_gives_empty_cloud(self):
        frame = DepthFrame(0.0, np.zeros((4, 4)), INTR_4X4)
        assert len(back_project(frame)) == 0

    def test_hand_applied_pinhole_2x2(self):
        # fx=fy=1, cx=cy=0, all depths 1: x=(u-0)*1/1, y=(v-0)*1/1, z=1
        intr = CameraIntrinsics(width=2, height=2, fx=1.0, fy=1.0, cx=0.0, cy=0.0)
        cloud = back_project(DepthFrame(0.0, np.ones((2, 2)), intr), 0.0, 10.0)
        expected = [(0, 0, 1), (1, 0, 1), (0, 1, 1), (1, 1, 1)]  # row-major order
        np.testing.assert_allclose(cloud.points, expected)
        assert cloud.frame == CAMERA

    def test_range_clamp_is_half_open(self):
        depth = np.array([[0.0, 0.25], [4.0, 7.5]], dtype=np.float32)
        intr = CameraIntrinsics(width=2, height=2, fx=1.0, fy=1.0, cx=0.0, cy=0.0)
        cloud = back_project(DepthFrame(0.0, depth, intr), 0.25, 7.5)
        # 0.0 invalid, 0.25 excluded (strict lower bound), 7.5 included
        np.testing.assert_allclose(sorted(cloud.points[:, 2]), [4.0, 7.5])

    def test_grid_mismatch_rejected(self):
        with pytest.raises(ValueError):
            DepthFrame(0.0, np.zeros(15), INTR_4X4)

    def test_points_from_wall_frame_lie_on_wall(self):
        # camera facing a wall z=2: constant-depth frame, every point has z=2
        intr = CameraIntrinsics(width=32, height=24, fx=20.0, fy=20.0, cx=16.0, cy=12.0)
        cloud = back_project(DepthFrame(0.0, np.full((24, 32), 2.0), intr))
        assert len(cloud) == 32 * 24
        np.testing.assert_allclose(cloud.points[:, 2], 2.0, atol=1e-6)


class TestTransformToGrf:
    def test_identity(self):
        cloud = cloud_from_seed(0)
        out = transform_to_grf(cloud, HeadPose(np.eye(3), np.zeros(3)))
        np.testing.assert_allclose(out.points, cloud.points)
        assert out.frame == GRF

    def test_pure_translation(self):
        cloud = PointCloud([[0.0, 0.0, 0.0]], CAMERA)
        out = transform_to_grf(cloud, HeadPose(np.eye(3), [1.0, 2.0, 3.0]))
        np.testing.assert_allclose(out.points, [[1.0, 2.0, 3.0]])

    def test_90_degree_yaw(self):
        # rotation-matrix arithmetic oracle: Rz(90deg) @ (1,0,0) = (0,1,0)
        rz = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        out = transform_to_grf(PointCloud([[1.0, 0.0, 0.0]], CAMERA), HeadPose(rz, np.zeros(3)))
        np.testing.assert_allclose(out.points, [[0.0, 1.0, 0.0]], atol=1e-9)

    def test_rejects_non_orthonormal_rotation(self):
        with pytest.raises(ValueError):
            HeadPose(np.eye(3) * 2.0, np.zeros(3))

    def test_rejects_grf_cloud(self):
        cloud = PointCloud(np.zeros((1, 3)), GRF)
        with pytest.raises(ValueError):
            transform_to_grf(cloud, HeadPose(np.eye(3), np.zeros(3)))

    @given(st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_round_trip_recovers_points(self, seed):
        cloud = cloud_from_seed(seed)
        pose = HeadPose(rotation_from_seed(seed), np.random.default_rng(seed).normal(size=3))
        there = transform_to_grf(cloud, pose)
        inv = pose.inverse()
        back = there.points @ inv.rotation.T + inv.translation
        np.testing.assert_allclose(back, cloud.points, atol=1e-6)


class TestVoxelDownsample:
    def test_empty(self):
        out = voxel_downsample(PointCloud(np.zeros((0, 3))), 0.5)
        assert len(out) == 0

    def test_identical_points_collapse_to_centroid(self):
        pts = np.tile([0.1, 0.1, 0.1], (100, 1))
        out = voxel_downsample(PointCloud(pts), 0.5)
        np.testing.assert_allclose(out.points, [[0.1, 0.1, 0.1]])

    def test_floor_bucketing_splits_cells(self):
        # floor(0.1/0.5)=0 and floor(0.9/0.5)=1: distinct voxels
        out = voxel_downsample(PointCloud([[0.1, 0, 0], [0.9, 0, 0]]), 0.5)
        assert len(out) == 2

    def test_negative_coordinates_bucket_separately(self):
        out = voxel_downsample(PointCloud([[-0.1, 0, 0], [0.1, 0, 0]]), 0.5)
        assert len(out) == 2

    def test_rejects_nonpositive_voxel(self):
        with pytest.raises(ValueError):
            voxel_downsample(cloud_from_seed(1), 0.0)

    @given(st.integers(0, 10_000), st.floats(0.05, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_idempotent(self, seed, voxel):
        cloud = cloud_from_seed(seed, n=200)
        once = voxel_downsample(cloud, voxel)
        twice = voxel_downsample(once, voxel)
        assert len(once) == len(twice)
        np.testing.assert_allclose(twice.points, once.points)

    @given(st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_one_point_per_voxel(self, seed):
        out = voxel_downsample(cloud_from_seed(seed, n=300), 0.25)
        keys = np.floor(out.points / 0.25).astype(np.int64)
        assert len(np.unique(keys, axis=0)) == len(keys)
        assert len(out) <= 300
