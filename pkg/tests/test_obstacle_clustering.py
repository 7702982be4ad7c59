import numpy as np
import pytest

from navi.frame_ingest import GRF, PointCloud
from navi.obstacle_clustering import (
    Aabb,
    DbscanParams,
    all_cluster_boxes,
    cluster_to_aabb,
    dbscan,
)
from oracles import brute_force_dbscan, canonical_labeling


def two_blob_cloud(seed=0, spread=0.05, separation=5.0, n=20):
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, spread, size=(n, 3))
    b = rng.normal(0.0, spread, size=(n, 3)) + [separation, 0, 0]
    return PointCloud(np.vstack([a, b]), GRF)


def random_cloud(seed, max_points=500):
    """Mixture of dense blobs and uniform scatter, the oracle-equivalence diet."""
    rng = np.random.default_rng(seed)
    parts = []
    for _ in range(rng.integers(0, 4)):
        c = rng.uniform(-4, 4, 3)
        parts.append(c + rng.normal(0, 0.1, size=(rng.integers(5, 60), 3)))
    parts.append(rng.uniform(-4, 4, size=(rng.integers(1, 80), 3)))
    pts = np.vstack(parts)[:max_points]
    return PointCloud(pts, GRF)


class TestDbscan:
    def test_empty(self):
        out = dbscan(PointCloud(np.zeros((0, 3)), GRF))
        assert len(out.labels) == 0 and out.n_clusters == 0

    def test_two_well_separated_groups(self):
        cloud = two_blob_cloud()
        params = DbscanParams(eps=0.3, min_pts=5)
        out = dbscan(cloud, params)
        assert out.n_clusters == 2
        assert np.count_nonzero(out.labels == -1) == 0
        oracle = brute_force_dbscan(cloud.points, params.eps, params.min_pts)
        np.testing.assert_array_equal(
            canonical_labeling(out.labels), canonical_labeling(oracle)
        )

    def test_isolated_points_are_noise(self):
        pts = np.array([[i * 1.5, 0.0, 0.0] for i in range(10)])
        out = dbscan(PointCloud(pts, GRF), DbscanParams(eps=0.3, min_pts=5))
        assert np.all(out.labels == -1)

    def test_labels_contiguous_and_clusters_have_core(self):
        cloud = random_cloud(3)
        params = DbscanParams(eps=0.3, min_pts=8)
        out = dbscan(cloud, params)
        if out.n_clusters:
            assert sorted(set(out.labels[out.labels >= 0])) == list(range(out.n_clusters))
        # every cluster holds at least one core point
        d2 = np.sum((cloud.points[:, None] - cloud.points[None, :]) ** 2, axis=2)
        core = np.count_nonzero(d2 <= params.eps**2, axis=1) >= params.min_pts
        for k in range(out.n_clusters):
            assert np.any(core[out.labels == k])

    def test_oracle_equivalence_on_random_clouds(self):
        params = DbscanParams(eps=0.3, min_pts=8)
        for seed in range(40):
            cloud = random_cloud(seed)
            mine = canonical_labeling(dbscan(cloud, params).labels)
            ref = canonical_labeling(brute_force_dbscan(cloud.points, params.eps, params.min_pts))
            np.testing.assert_array_equal(mine, ref, err_msg=f"seed {seed}")

    def test_noise_monotone_in_eps(self):
        for seed in range(10):
            cloud = random_cloud(seed)
            noise_counts = []
            for eps in (0.6, 0.45, 0.3, 0.15):
                labels = dbscan(cloud, DbscanParams(eps=eps, min_pts=8)).labels
                noise_counts.append(int(np.count_nonzero(labels == -1)))
            assert noise_counts == sorted(noise_counts)

    def test_rejects_camera_frame(self):
        with pytest.raises(ValueError):
            dbscan(PointCloud(np.zeros((4, 3))))


class TestClusterToAabb:
    def test_single_point_cluster(self):
        cloud = PointCloud([[1.0, 2.0, 3.0]], GRF)
        labeling = dbscan(cloud, DbscanParams(eps=0.3, min_pts=1))
        box = cluster_to_aabb(cloud, labeling, 0)
        np.testing.assert_allclose(box.min, [1, 2, 3])
        np.testing.assert_allclose(box.max, [1, 2, 3])

    def test_two_corner_cluster(self):
        cloud = PointCloud([[0, 0, 0], [1, 2, 3]], GRF)
        labeling = dbscan(cloud, DbscanParams(eps=5.0, min_pts=1))
        box = cluster_to_aabb(cloud, labeling, 0)
        np.testing.assert_allclose(box.min, [0, 0, 0])
        np.testing.assert_allclose(box.max, [1, 2, 3])

    def test_unknown_label_raises(self):
        cloud = PointCloud([[0, 0, 0]], GRF)
        labeling = dbscan(cloud, DbscanParams(eps=0.3, min_pts=1))
        with pytest.raises(ValueError):
            cluster_to_aabb(cloud, labeling, 7)

    def test_box_contains_all_members(self):
        cloud = random_cloud(5)
        labeling = dbscan(cloud, DbscanParams(eps=0.3, min_pts=8))
        for k in range(labeling.n_clusters):
            box = cluster_to_aabb(cloud, labeling, k)
            member_pts = cloud.points[labeling.labels == k]
            assert np.all(member_pts >= box.min - 1e-12)
            assert np.all(member_pts <= box.max + 1e-12)

    def test_voxelized_box_surface_recovers_extents(self):
        # sample a box surface on a 0.05 grid, cluster, compare to truth
        lo, hi = np.array([1.0, 0.5, 0.0]), np.array([1.5, 1.0, 1.2])
        g = 0.05
        xs = np.arange(lo[0], hi[0] + 1e-9, g)
        ys = np.arange(lo[1], hi[1] + 1e-9, g)
        zs = np.arange(lo[2], hi[2] + 1e-9, g)
        face = [[x, y, hi[2]] for x in xs for y in ys]
        side = [[x, lo[1], z] for x in xs for z in zs]
        cloud = PointCloud(np.array(face + side), GRF)
        labeling = dbscan(cloud, DbscanParams(eps=0.15, min_pts=4))
        assert labeling.n_clusters == 1
        box = cluster_to_aabb(cloud, labeling, 0)
        assert np.all(np.abs(box.min - lo) <= 0.10)
        assert np.all(np.abs(box.max - hi) <= 0.10)


class TestAabb:
    def test_validation(self):
        with pytest.raises(ValueError):
            Aabb([1, 0, 0], [0, 0, 0])
        with pytest.raises(ValueError):
            Aabb.from_points(np.zeros((0, 3)))

    def test_center_and_size(self):
        box = Aabb([0, 0, 0], [2, 4, 6])
        np.testing.assert_allclose(box.center, [1, 2, 3])
        np.testing.assert_allclose(box.size, [2, 4, 6])

    def test_all_cluster_boxes_order(self):
        cloud = two_blob_cloud()
        labeling = dbscan(cloud, DbscanParams(eps=0.3, min_pts=5))
        boxes = all_cluster_boxes(cloud, labeling)
        assert len(boxes) == 2
        assert boxes[0].center[0] < boxes[1].center[0]
