"""Persistent global obstacle list.

One writer (the frame-integration path) mutates the map; readers get
snapshots (lists of copies) that stay valid while integration continues.
Detections merge into existing obstacles by box-center proximity, greedy
over ascending center distance, one detection per obstacle per call.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from navi.obstacle_clustering import Aabb

FORMAT_VERSION = 1

# Vertical slab (meters above floor) that counts as a navigation hazard;
# overhead fixtures above it are ignored by the planner projection.
DEFAULT_SLAB = (0.1, 2.2)


class MapFormatError(ValueError):
    """Raised when a persisted map payload cannot be decoded."""


@dataclass(frozen=True)
class MergePolicy:
    merge_center_dist: float = 0.5
    expiry: float = 10.0
    smoothing: float = 0.7

    def __post_init__(self):
        if self.merge_center_dist < 0:
            raise ValueError("merge_center_dist must be >= 0")
        if self.expiry <= 0:
            raise ValueError("expiry must be positive")
        if not (0 <= self.smoothing <= 1):
            raise ValueError("smoothing must be in [0, 1]")


@dataclass(frozen=True)
class Rect:
    """2D axis-aligned rectangle in GRF x-y meters."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if self.min_x > self.max_x or self.min_y > self.max_y:
            raise ValueError("rect min must be <= max componentwise")


@dataclass(frozen=True)
class FlatObstacle:
    id: int
    rect: Rect


@dataclass(eq=False)
class Obstacle:
    id: int
    box: Aabb
    observations: int
    first_seen: float
    last_seen: float

    def copy(self) -> "Obstacle":
        return Obstacle(self.id, Aabb(self.box.min.copy(), self.box.max.copy()),
                        self.observations, self.first_seen, self.last_seen)


class ObstacleMap:
    """Dynamic list of detected obstacles with merge and expiry policy."""

    def __init__(self, policy: MergePolicy = MergePolicy()):
        self.policy = policy
        self.obstacles: list[Obstacle] = []
        self.next_id = 0

    def __len__(self) -> int:
        return len(self.obstacles)

    def integrate(self, detections: list[Aabb], now: float) -> None:
        """Fold one frame's detections into the map.

        Pairs (obstacle, detection) within merge_center_dist are matched
        greedily by ascending center distance; matched boxes are blended
        per corner as smoothing*old + (1-smoothing)*new.  Unmatched
        detections become new obstacles.
        """
        pairs = []
        for oi, obs in enumerate(self.obstacles):
            oc = obs.box.center
            for dj, det in enumerate(detections):
                dist = float(np.linalg.norm(oc - det.center))
                if dist <= self.policy.merge_center_dist:
                    pairs.append((dist, obs.id, dj, oi))
        pairs.sort()

        s = self.policy.smoothing
        used_obs: set[int] = set()
        used_det: set[int] = set()
        for _, _, dj, oi in pairs:
            if oi in used_obs or dj in used_det:
                continue
            used_obs.add(oi)
            used_det.add(dj)
            obs, det = self.obstacles[oi], detections[dj]
            obs.box = Aabb(s * obs.box.min + (1 - s) * det.min,
                           s * obs.box.max + (1 - s) * det.max)
            obs.observations += 1
            obs.last_seen = now

        for dj, det in enumerate(detections):
            if dj in used_det:
                continue
            self.obstacles.append(Obstacle(self.next_id, det, 1, now, now))
            self.next_id += 1

    def expire(self, now: float) -> None:
        """Drop obstacles not re-observed for longer than the expiry window."""
        self.obstacles = [o for o in self.obstacles if now - o.last_seen <= self.policy.expiry]

    def project_2d(self, slab_min_z: float = DEFAULT_SLAB[0],
                   slab_max_z: float = DEFAULT_SLAB[1]) -> list[FlatObstacle]:
        """Snapshot of x-y footprints for obstacles intersecting the z slab."""
        if slab_min_z >= slab_max_z:
            raise ValueError("slab_min_z must be < slab_max_z")
        out = []
        for o in self.obstacles:
            if o.box.min[2] <= slab_max_z and o.box.max[2] >= slab_min_z:
                out.append(FlatObstacle(o.id, Rect(
                    float(o.box.min[0]), float(o.box.min[1]),
                    float(o.box.max[0]), float(o.box.max[1]))))
        return out

    def snapshot(self) -> list[Obstacle]:
        return [o.copy() for o in self.obstacles]

    def save(self) -> bytes:
        doc = {
            "version": FORMAT_VERSION,
            "next_id": self.next_id,
            "obstacles": [
                {
                    "id": o.id,
                    "box": {"min": list(o.box.min), "max": list(o.box.max)},
                    "observations": o.observations,
                    "first_seen": o.first_seen,
                    "last_seen": o.last_seen,
                }
                for o in self.obstacles
            ],
        }
        return json.dumps(doc).encode("utf-8")

    @classmethod
    def load(cls, payload: bytes, policy: MergePolicy = MergePolicy()) -> "ObstacleMap":
        try:
            doc = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MapFormatError(f"cannot decode map payload: {exc}") from exc
        if not isinstance(doc, dict) or doc.get("version") != FORMAT_VERSION:
            raise MapFormatError(f"unsupported map version {doc.get('version')!r}"
                                 if isinstance(doc, dict) else "map payload is not an object")
        out = cls(policy)
        try:
            out.next_id = int(doc["next_id"])
            for rec in doc["obstacles"]:
                out.obstacles.append(Obstacle(
                    id=int(rec["id"]),
                    box=Aabb(rec["box"]["min"], rec["box"]["max"]),
                    observations=int(rec["observations"]),
                    first_seen=float(rec["first_seen"]),
                    last_seen=float(rec["last_seen"]),
                ))
        except (KeyError, TypeError, ValueError) as exc:
            raise MapFormatError(f"malformed map payload: {exc}") from exc
        ids = [o.id for o in out.obstacles]
        if len(set(ids)) != len(ids):
            raise MapFormatError("duplicate obstacle ids")
        if any(i >= out.next_id for i in ids):
            raise MapFormatError("next_id must exceed every issued id")
        return out
