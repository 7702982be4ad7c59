"""Collision-free heading search.

Candidate headings fan out from the desired bearing in alternating
clockwise / counter-clockwise steps.  A heading is valid only when the
sample points on every safety ring keep more than ``clearance`` distance
to every obstacle footprint: a near ring that is clear while a far ring
is blocked would still steer the user into the obstacle.

Angles are GRF yaw in degrees, counter-clockwise positive when viewed
from above (+x is 0, +y is 90).  "Clockwise" therefore means the negative
angular direction, and ties between equally small deviations break to the
clockwise side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from navi.obstacle_map import FlatObstacle

CLEAR_AHEAD = "clear_ahead"
DEVIATED = "deviated"
BLOCKED = "blocked"

# z at which guidance points are emitted for display purposes
GUIDANCE_DISPLAY_HEIGHT = 1.0


@dataclass(frozen=True)
class PlannerParams:
    ring_radii: tuple[float, ...] = (0.5, 1.0, 1.5)
    angular_step: float = 5.0
    clearance: float = 0.4
    max_deviation: float = 120.0
    guidance_distance: float = 1.5

    def __post_init__(self):
        radii = tuple(float(r) for r in self.ring_radii)
        if not radii or any(r <= 0 for r in radii):
            raise ValueError("ring_radii must be positive")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("ring_radii must be strictly ascending")
        object.__setattr__(self, "ring_radii", radii)
        if self.angular_step <= 0 or abs(360.0 / self.angular_step - round(360.0 / self.angular_step)) > 1e-9:
            raise ValueError("angular_step must divide 360 evenly")
        if not (0 < self.max_deviation <= 180):
            raise ValueError("max_deviation must be in (0, 180]")
        if self.guidance_distance <= 0:
            raise ValueError("guidance_distance must be positive")


@dataclass(frozen=True)
class HeadingQuery:
    position: tuple[float, float]
    desired_heading: float
    obstacles: list[FlatObstacle] = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "desired_heading", float(self.desired_heading) % 360.0)


@dataclass(frozen=True)
class HeadingResult:
    heading: float
    deviation: float
    guidance_point: tuple[float, float, float]
    status: str

    def to_dict(self) -> dict:
        return {
            "heading": self.heading,
            "deviation": self.deviation,
            "guidance_point": list(self.guidance_point),
            "status": self.status,
        }


def _rect_arrays(obstacles: list[FlatObstacle]) -> np.ndarray:
    return np.array(
        [[o.rect.min_x, o.rect.min_y, o.rect.max_x, o.rect.max_y] for o in obstacles],
        dtype=np.float64,
    ).reshape(-1, 4)


def _valid_mask(
    position: tuple[float, float],
    headings_deg: np.ndarray,
    rects: np.ndarray,
    params: PlannerParams,
) -> np.ndarray:
    """Validity of each candidate heading, all rings conjunctive."""
    if rects.shape[0] == 0:
        return np.ones(len(headings_deg), dtype=bool)
    h = np.radians(headings_deg)
    radii = np.asarray(params.ring_radii)
    sx = position[0] + radii[None, :] * np.cos(h)[:, None]  # (candidates, rings)
    sy = position[1] + radii[None, :] * np.sin(h)[:, None]
    dx = np.maximum(rects[:, 0] - sx[..., None], sx[..., None] - rects[:, 2])
    dy = np.maximum(rects[:, 1] - sy[..., None], sy[..., None] - rects[:, 3])
    dist = np.hypot(np.maximum(dx, 0.0), np.maximum(dy, 0.0))
    return np.all(dist > params.clearance, axis=(1, 2))


def is_heading_valid(query: HeadingQuery, heading: float, params: PlannerParams = PlannerParams()) -> bool:
    """True iff every ring sample along ``heading`` clears all obstacles."""
    mask = _valid_mask(query.position, np.array([heading], dtype=np.float64),
                       _rect_arrays(query.obstacles), params)
    return bool(mask[0])


def _guidance_point(position, heading_deg, distance) -> tuple[float, float, float]:
    h = math.radians(heading_deg)
    return (
        position[0] + distance * math.cos(h),
        position[1] + distance * math.sin(h),
        GUIDANCE_DISPLAY_HEIGHT,
    )


def find_safe_heading(query: HeadingQuery, params: PlannerParams = PlannerParams()) -> HeadingResult:
    """Pick the valid heading with the smallest absolute deviation.

    Candidates are desired +/- k*angular_step for ascending k; at equal
    |k| the clockwise (negative) side wins.  With no valid candidate
    within max_deviation the result is status=blocked at the desired
    heading with the guidance point left at the user's position.
    """
    k_max = int(math.floor(params.max_deviation / params.angular_step + 1e-9))
    deviations = [0.0]
    for k in range(1, k_max + 1):
        deviations.append(-k * params.angular_step)
        deviations.append(k * params.angular_step)
    devs = np.array(deviations)
    headings = (query.desired_heading + devs) % 360.0

    valid = _valid_mask(query.position, headings, _rect_arrays(query.obstacles), params)
    hits = np.flatnonzero(valid)
    if hits.size == 0:
        return HeadingResult(
            heading=query.desired_heading,
            deviation=0.0,
            guidance_point=(query.position[0], query.position[1], GUIDANCE_DISPLAY_HEIGHT),
            status=BLOCKED,
        )
    first = int(hits[0])  # candidate order already encodes |k| then clockwise-first
    deviation = float(devs[first])
    heading = float(headings[first])
    return HeadingResult(
        heading=heading,
        deviation=deviation,
        guidance_point=_guidance_point(query.position, heading, params.guidance_distance),
        status=CLEAR_AHEAD if first == 0 else DEVIATED,
    )
