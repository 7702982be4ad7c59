"""Synthetic scenes, analytic depth rendering, and closed-loop agent walks.

Depth frames are produced by exact ray casting (slab method) against
floor plane and boxes, so every rendered sample has a known ground-truth
surface.  The closed-loop walk drives the full pipeline at the simulated
5 Hz stream rate and records the agent's true distance to scene geometry
at every step, which is what the safety checks assert on.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from navi.frame_ingest import CameraIntrinsics, DepthFrame, HeadPose
from navi.heading_planner import (
    BLOCKED,
    HeadingQuery,
    HeadingResult,
    PlannerParams,
    find_safe_heading,
)
from navi.obstacle_clustering import Aabb
from navi.pipeline import PipelineConfig, PipelineEngine

STREAM_FPS = 5.0
TURN_RATE_DEG_S = 120.0
DEFAULT_WALK_SPEED = 0.8
GOAL_RADIUS = 0.3

# simulated headset mount: camera height and downward pitch
HEAD_HEIGHT = 1.5
CAMERA_PITCH_DEG = 25.0

# long-throw-class stream resolution used for replay containers
SIM_INTRINSICS = CameraIntrinsics(width=320, height=288, fx=160.0, fy=160.0, cx=160.0, cy=144.0)
# reduced resolution for closed-loop walks, same field of view
WALK_INTRINSICS = CameraIntrinsics(width=128, height=96, fx=64.0, fy=64.0, cx=64.0, cy=48.0)


@dataclass(frozen=True)
class SceneSpec:
    """Floor plane plus boxes and thin wall boxes, with seeded depth noise."""

    floor_z: float | None = 0.0
    boxes: tuple[Aabb, ...] = ()
    walls: tuple[Aabb, ...] = ()
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        object.__setattr__(self, "boxes", tuple(self.boxes))
        object.__setattr__(self, "walls", tuple(self.walls))

    @property
    def geometry(self) -> tuple[Aabb, ...]:
        return self.boxes + self.walls


@dataclass(frozen=True)
class AgentState:
    position: tuple[float, float]
    yaw: float
    speed: float
    goal: tuple[float, float]

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "goal", (float(self.goal[0]), float(self.goal[1])))


def head_pose(position: tuple[float, float], yaw_deg: float, timestamp: float = 0.0,
              height: float = HEAD_HEIGHT, pitch_deg: float = CAMERA_PITCH_DEG) -> HeadPose:
    """Camera pose for an agent at ``position`` facing ``yaw_deg``, pitched down."""
    psi, theta = math.radians(yaw_deg), math.radians(pitch_deg)
    forward = np.array([math.cos(theta) * math.cos(psi),
                        math.cos(theta) * math.sin(psi),
                        -math.sin(theta)])
    right = np.array([math.sin(psi), -math.cos(psi), 0.0])
    down = np.cross(forward, right)
    rotation = np.column_stack([right, down, forward])  # camera x,y,z -> GRF
    translation = np.array([position[0], position[1], height])
    return HeadPose(rotation, translation, timestamp)


def render_depth(scene: SceneSpec, pose: HeadPose, intrinsics: CameraIntrinsics = SIM_INTRINSICS,
                 max_range: float = 7.5, rng: np.random.Generator | None = None,
                 timestamp: float | None = None) -> DepthFrame:
    """Cast one pinhole ray per pixel and return z-depth to the nearest surface.

    Rays that hit nothing within ``max_range`` yield 0.0, the sensor's
    invalid-sample sentinel.  Noise is Gaussian per valid pixel, drawn from
    ``rng`` (or a generator seeded from the scene) so frames are reproducible.
    """
    h, w = intrinsics.height, intrinsics.width
    u, v = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    # direction with unit camera-z component: the ray parameter IS the z-depth
    d_cam = np.stack([(u - intrinsics.cx) / intrinsics.fx,
                      (v - intrinsics.cy) / intrinsics.fy,
                      np.ones_like(u)], axis=-1)
    d = d_cam @ pose.rotation.T
    o = pose.translation

    t_best = np.full((h, w), np.inf)
    eps = 1e-9
    if scene.floor_z is not None:
        dz = d[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (scene.floor_z - o[2]) / dz
        t = np.where(np.abs(dz) > eps, t, np.inf)
        t_best = np.where((t > eps) & (t < t_best), t, t_best)

    for box in scene.geometry:
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (box.min - o) / d
            t2 = (box.max - o) / d
        near = np.fmin(t1, t2)  # fmin/fmax drop NaNs from on-boundary origins
        far = np.fmax(t1, t2)
        t_near = np.fmax(np.fmax(near[..., 0], near[..., 1]), near[..., 2])
        t_far = np.fmin(np.fmin(far[..., 0], far[..., 1]), far[..., 2])
        hit = (t_far >= t_near) & (t_far > eps)
        t_hit = np.where(t_near > eps, t_near, t_far)
        t_best = np.where(hit & (t_hit < t_best), t_hit, t_best)

    depth = np.where(np.isfinite(t_best) & (t_best <= max_range), t_best, 0.0)
    if scene.noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng(scene.seed)
        valid = depth > 0
        depth = depth + np.where(valid, rng.normal(0.0, scene.noise_sigma, depth.shape), 0.0)
        depth = np.maximum(depth, 0.0)
    ts = float(timestamp if timestamp is not None else pose.timestamp)
    return DepthFrame(ts, depth.astype(np.float32), intrinsics)


def step_agent(state: AgentState, result: HeadingResult, dt: float,
               turn_rate: float = TURN_RATE_DEG_S) -> AgentState:
    """Slew yaw toward the commanded heading and advance along the new yaw.

    A blocked result freezes the agent in place (yaw may still align).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    diff = (result.heading - state.yaw + 180.0) % 360.0 - 180.0
    turn = max(-turn_rate * dt, min(turn_rate * dt, diff))
    yaw = (state.yaw + turn) % 360.0
    speed = 0.0 if result.status == BLOCKED else state.speed
    rad = math.radians(yaw)
    pos = (state.position[0] + speed * dt * math.cos(rad),
           state.position[1] + speed * dt * math.sin(rad))
    return AgentState(pos, yaw, state.speed, state.goal)


def bearing_deg(src: tuple[float, float], dst: tuple[float, float]) -> float:
    return math.degrees(math.atan2(dst[1] - src[1], dst[0] - src[0])) % 360.0


def min_scene_clearance(position: tuple[float, float], scene: SceneSpec) -> float:
    """Ground-truth 2D distance from a point to the nearest box footprint."""
    best = math.inf
    for box in scene.geometry:
        dx = max(box.min[0] - position[0], 0.0, position[0] - box.max[0])
        dy = max(box.min[1] - position[1], 0.0, position[1] - box.max[1])
        best = min(best, math.hypot(dx, dy))
    return best


@dataclass(frozen=True)
class WalkStep:
    t: float
    position: tuple[float, float]
    yaw: float
    heading: float
    status: str
    min_clearance: float
    obstacles: tuple[tuple[int, tuple[float, float, float, float]], ...]

    def to_record(self) -> dict:
        return {
            "t": self.t,
            "position": list(self.position),
            "yaw": self.yaw,
            "heading": self.heading,
            "status": self.status,
            "min_clearance": None if math.isinf(self.min_clearance) else self.min_clearance,
        }


@dataclass(frozen=True)
class WalkTrace:
    steps: tuple[WalkStep, ...]
    reached: bool

    def min_clearance(self) -> float:
        return min((s.min_clearance for s in self.steps), default=math.inf)

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(s.to_record()) for s in self.steps)


def run_walk(scene: SceneSpec, start: AgentState, params: PlannerParams = PlannerParams(),
             frames: int = 100, *, pipeline: PipelineConfig = PipelineConfig(floor_lock=True),
             intrinsics: CameraIntrinsics = WALK_INTRINSICS, fps: float = STREAM_FPS,
             goal_radius: float = GOAL_RADIUS, engine: PipelineEngine | None = None,
             initial_scan_frames: int = 0, mutate=None) -> WalkTrace:
    """Closed loop: render, run the pipeline, plan a heading, step the agent.

    The desired heading at every step is the bearing to the goal.  The walk
    ends early once the agent is within ``goal_radius`` of the goal.

    ``initial_scan_frames`` renders that many in-place frames rotating a
    full turn before walking, mimicking a user looking around at launch.
    ``mutate``, when given, is called as ``mutate(step_index, scene)`` before
    each frame and may return a replacement scene (dynamic obstacles).
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    if engine is None:
        engine = PipelineEngine(pipeline)
    rng = np.random.default_rng(scene.seed)
    state = start
    dt = 1.0 / fps

    for s in range(initial_scan_frames):
        yaw = (state.yaw + 360.0 * s / initial_scan_frames) % 360.0
        t = -dt * (initial_scan_frames - s)
        pose = head_pose(state.position, yaw, t)
        engine.process_frame(render_depth(scene, pose, intrinsics, rng=rng, timestamp=t), pose)

    steps: list[WalkStep] = []
    reached = False
    for k in range(frames):
        if mutate is not None:
            updated = mutate(k, scene)
            if updated is not None:
                scene = updated
        t = k * dt
        pose = head_pose(state.position, state.yaw, t)
        engine.process_frame(render_depth(scene, pose, intrinsics, rng=rng, timestamp=t), pose)
        flats = engine.map.project_2d(*engine.config.slab)
        desired = bearing_deg(state.position, state.goal)
        result = find_safe_heading(HeadingQuery(state.position, desired, flats), params)
        state = step_agent(state, result, dt)
        steps.append(WalkStep(
            t=t,
            position=state.position,
            yaw=state.yaw,
            heading=result.heading,
            status=result.status,
            min_clearance=min_scene_clearance(state.position, scene),
            obstacles=tuple((f.id, (f.rect.min_x, f.rect.min_y, f.rect.max_x, f.rect.max_y))
                            for f in flats),
        ))
        if math.hypot(state.position[0] - state.goal[0],
                      state.position[1] - state.goal[1]) <= goal_radius:
            reached = True
            break
    return WalkTrace(tuple(steps), reached)


def corridor_scene(seed: int, *, length: float = 9.0, width: float = 2.4,
                   n_obstacles: int = 2, noise_sigma: float = 0.005,
                   debris: int = 0) -> tuple[SceneSpec, AgentState]:
    """Hallway fixture: two long walls, an end wall, and person-sized boxes.

    Boxes hug one side of the corridor so a gap wide enough for the default
    clearance always remains.  ``debris`` adds tiny floating boxes that
    cluster below min_pts and therefore exercise the noise label.
    """
    rng = np.random.default_rng(seed)
    wall_h, thick = 2.2, 0.1
    # open-ended corridor: a closing end wall would meet the side walls in a
    # single connected cluster whose bounding box swallows the free channel
    walls = (
        Aabb([-0.5, -thick, 0.0], [length + 1.0, 0.0, wall_h]),
        Aabb([-0.5, width, 0.0], [length + 1.0, width + thick, wall_h]),
    )
    boxes = []
    # Boxes intrude past the centerline so the agent has to swerve, but all
    # hug the same wall, keeping the lane along the opposite wall open.  The
    # 0.35 m wall gap stays above the clustering eps: a box touching a wall
    # would fuse with it into one cluster whose bounding box seals the lane.
    lo, hi = 2.5, length - 3.4
    slot = (hi - lo) / max(n_obstacles, 1)
    bd, bh = 0.5, 1.7
    side_low = bool(rng.integers(0, 2))
    for i in range(n_obstacles):
        x0 = lo + slot * i + rng.uniform(0.0, max(slot - bd, 0.0))
        bw = rng.uniform(0.7, 1.0)
        y0 = 0.35 if side_low else width - 0.35 - bw
        boxes.append(Aabb([x0, y0, 0.0], [x0 + bd, y0 + bw, bh]))
    for _ in range(debris):
        cx = rng.uniform(1.5, length - 1.5)
        cy = rng.uniform(0.4, width - 0.4)
        cz = rng.uniform(0.8, 1.4)
        boxes.append(Aabb([cx, cy, cz], [cx + 0.05, cy + 0.05, cz + 0.05]))
    scene = SceneSpec(floor_z=0.0, boxes=tuple(boxes), walls=walls,
                      noise_sigma=noise_sigma, seed=seed)
    start = AgentState((0.5, width / 2.0), yaw=0.0, speed=DEFAULT_WALK_SPEED,
                       goal=(length - 2.0, width / 2.0))
    return scene, start


def walled_in_scene(seed: int = 0, cell: float = 3.0) -> tuple[SceneSpec, AgentState]:
    """Agent sealed inside a cell of thick walls: no valid heading anywhere."""
    t, h = 1.0, 2.0
    half = cell / 2.0
    walls = (
        Aabb([-half - t, -half - t, 0.0], [half + t, -half, h]),
        Aabb([-half - t, half, 0.0], [half + t, half + t, h]),
        Aabb([-half - t, -half, 0.0], [-half, half, h]),
        Aabb([half, -half, 0.0], [half + t, half, h]),
    )
    scene = SceneSpec(floor_z=0.0, boxes=(), walls=walls, noise_sigma=0.0, seed=seed)
    start = AgentState((0.0, 0.0), yaw=0.0, speed=DEFAULT_WALK_SPEED, goal=(10.0, 0.0))
    return scene, start


def move_box(scene: SceneSpec, index: int, new_box: Aabb) -> SceneSpec:
    boxes = list(scene.boxes)
    boxes[index] = new_box
    return replace(scene, boxes=tuple(boxes))
