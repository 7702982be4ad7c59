"""Per-frame processing chain shared by the HTTP service, replay CLI and simulator.

Stages, in order: back-projection, registration to GRF, voxel downsampling,
floor fit/removal, DBSCAN clustering, box extraction, map integration,
expiry.  Each stage is timed so the replay benchmark can report per-stage
percentiles.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from navi.floor_removal import PlaneModel, RansacParams, fit_floor, split_floor
from navi.frame_ingest import (
    DEFAULT_MAX_DEPTH,
    DEFAULT_MIN_DEPTH,
    DEFAULT_VOXEL_SIZE,
    DepthFrame,
    HeadPose,
    PointCloud,
    back_project,
    transform_to_grf,
    voxel_downsample,
)
from navi.obstacle_clustering import (
    ClusterLabeling,
    DbscanParams,
    all_cluster_boxes,
    dbscan,
)
from navi.obstacle_map import DEFAULT_SLAB, MergePolicy, ObstacleMap

log = logging.getLogger(__name__)

STAGES = ("back_project", "to_grf", "voxel", "floor", "cluster", "integrate")


@dataclass(frozen=True)
class PipelineConfig:
    min_depth: float = DEFAULT_MIN_DEPTH
    max_depth: float = DEFAULT_MAX_DEPTH
    voxel_size: float = DEFAULT_VOXEL_SIZE
    ransac: RansacParams = field(default_factory=RansacParams)
    dbscan: DbscanParams = field(default_factory=DbscanParams)
    merge: MergePolicy = field(default_factory=MergePolicy)
    slab: tuple[float, float] = DEFAULT_SLAB
    # fit the floor once per session instead of per frame
    floor_lock: bool = False


@dataclass(frozen=True)
class FrameReport:
    frame_id: int
    obstacles_total: int
    processing_ms: float
    stage_ms: dict[str, float]


class PipelineEngine:
    """Holds the obstacle map and runs the stage chain on incoming frames.

    Frame timestamps drive integration and expiry, so replaying a recording
    is fully deterministic regardless of wall-clock speed.  The per-frame
    RANSAC seed is derived from the configured seed and the frame id.
    """

    def __init__(self, config: PipelineConfig = PipelineConfig()):
        self.config = config
        self.map = ObstacleMap(config.merge)
        self.frame_count = 0
        self.locked_plane: PlaneModel | None = None
        # retained for scene dumps: GRF cloud split of the last frame
        self.last_floor: PointCloud | None = None
        self.last_rest: PointCloud | None = None
        self.last_labeling: ClusterLabeling | None = None

    def process_frame(self, frame: DepthFrame, pose: HeadPose) -> FrameReport:
        cfg = self.config
        stage_ms: dict[str, float] = {}
        t_start = time.perf_counter()

        def timed(name, fn, *args, **kwargs):
            t0 = time.perf_counter()
            out = fn(*args, **kwargs)
            stage_ms[name] = (time.perf_counter() - t0) * 1e3
            return out

        cloud = timed("back_project", back_project, frame, cfg.min_depth, cfg.max_depth)
        cloud = timed("to_grf", transform_to_grf, cloud, pose)
        cloud = timed("voxel", voxel_downsample, cloud, cfg.voxel_size)

        t0 = time.perf_counter()
        plane = self.locked_plane
        if plane is None:
            params = replace(cfg.ransac, seed=cfg.ransac.seed + self.frame_count)
            plane = fit_floor(cloud, params)
            if plane is not None and cfg.floor_lock:
                self.locked_plane = plane
        if plane is None:
            log.warning("frame %d: no floor plane found, keeping all points as obstacles",
                        self.frame_count)
            floor = PointCloud(np.zeros((0, 3)), cloud.frame)
            rest = cloud
        else:
            floor, rest = split_floor(cloud, plane, cfg.ransac.inlier_threshold)
        stage_ms["floor"] = (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        labeling = dbscan(rest, cfg.dbscan)
        boxes = all_cluster_boxes(rest, labeling)
        stage_ms["cluster"] = (time.perf_counter() - t0) * 1e3

        now = frame.timestamp
        t0 = time.perf_counter()
        self.map.integrate(boxes, now)
        self.map.expire(now)
        stage_ms["integrate"] = (time.perf_counter() - t0) * 1e3

        self.last_floor, self.last_rest, self.last_labeling = floor, rest, labeling
        report = FrameReport(
            frame_id=self.frame_count,
            obstacles_total=len(self.map),
            processing_ms=(time.perf_counter() - t_start) * 1e3,
            stage_ms=stage_ms,
        )
        self.frame_count += 1
        return report

    def scene_rows(self):
        """Labeled (x, y, z, label) rows for the last processed frame."""
        if self.last_rest is None or self.last_floor is None or self.last_labeling is None:
            return []
        rows = [(p[0], p[1], p[2], "floor") for p in self.last_floor.points]
        labels = self.last_labeling.labels
        for p, lab in zip(self.last_rest.points, labels):
            name = "noise" if lab < 0 else f"cluster_{lab}"
            rows.append((p[0], p[1], p[2], name))
        return rows
