"""2D differential-drive navigation environment.

Static arena of circles and axis-aligned rectangles, a range scanner, Euler
unicycle kinematics and the three-way episode termination (goal, collision,
step cap).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels

WORLD_FORMAT_VERSION = 1
WORLDS_DIR = Path(__file__).parent / "worlds"

LINEAR_BOUNDS = (0.0, 1.0)
ANGULAR_BOUNDS = (-1.0, 1.0)


class WorldFormatError(ValueError):
    """World document could not be parsed."""


class WorldValidationError(ValueError):
    """World document parsed but violates a geometric invariant."""


class EpisodeFinishedError(RuntimeError):
    """``step`` was called on an episode that already terminated."""


def wrap_angle(a: float) -> float:
    """Wrap an angle in radians into (-pi, pi]."""
    w = math.pi - math.fmod(math.pi - a, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    elif w > math.pi:
        w -= 2.0 * math.pi
    return w


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float


@dataclass(frozen=True)
class Action:
    linear: float
    angular: float

    def clamped(self) -> "Action":
        lin = min(max(float(self.linear), LINEAR_BOUNDS[0]), LINEAR_BOUNDS[1])
        ang = min(max(float(self.angular), ANGULAR_BOUNDS[0]), ANGULAR_BOUNDS[1])
        return Action(lin, ang)


@dataclass(frozen=True)
class World:
    bounds: tuple[float, float, float, float]
    obstacles: tuple = ()
    start_pose: tuple[float, float, float] = (1.0, 1.0, 0.0)
    goal: tuple[float, float] = (9.0, 9.0)
    goal_radius: float = 0.3
    robot_radius: float = 0.2
    name: str = ""
    # reserved for moving obstacles; always empty in this version
    dynamic_obstacles: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "_circles", np.array(
            [(o.cx, o.cy, o.r) for o in self.obstacles if isinstance(o, Circle)],
            dtype=np.float64).reshape(-1, 3))
        object.__setattr__(self, "_rects", np.array(
            [(o.xmin, o.ymin, o.xmax, o.ymax) for o in self.obstacles if isinstance(o, Rect)],
            dtype=np.float64).reshape(-1, 4))
        object.__setattr__(self, "_bounds", np.array(self.bounds, dtype=np.float64))

    @property
    def circles(self) -> np.ndarray:
        return self._circles

    @property
    def rects(self) -> np.ndarray:
        return self._rects

    @property
    def bounds_array(self) -> np.ndarray:
        return self._bounds

    def surface_distance(self, x: float, y: float) -> float:
        return kernels.surface_distance(x, y, self._bounds, self._circles, self._rects)

    def is_free(self, x: float, y: float, margin: float | None = None) -> bool:
        """True when a disk of radius ``margin`` (default robot_radius) centred at (x, y) is clear."""
        if margin is None:
            margin = self.robot_radius
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmin < x < xmax and ymin < y < ymax):
            return False
        return self.surface_distance(x, y) > margin

    def with_task(self, start_pose, goal) -> "World":
        return replace(self, start_pose=tuple(float(v) for v in start_pose),
                       goal=tuple(float(v) for v in goal))

    def validate(self) -> "World":
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise WorldValidationError(f"degenerate bounds {self.bounds}")
        if self.goal_radius <= 0 or self.robot_radius <= 0:
            raise WorldValidationError("goal_radius and robot_radius must be positive")
        for o in self.obstacles:
            if isinstance(o, Circle) and o.r <= 0:
                raise WorldValidationError(f"circle with non-positive radius: {o}")
            if isinstance(o, Rect) and not (o.xmax > o.xmin and o.ymax > o.ymin):
                raise WorldValidationError(f"degenerate rectangle: {o}")
        sx, sy, _ = self.start_pose
        if not self.is_free(sx, sy):
            raise WorldValidationError(f"start {self.start_pose[:2]} is inside an inflated obstacle or out of bounds")
        gx, gy = self.goal
        if not self.is_free(gx, gy):
            raise WorldValidationError(f"goal {self.goal} is inside an inflated obstacle or out of bounds")
        return self


_WORLD_KEYS = {"format_version", "name", "bounds", "robot_radius", "goal_radius", "start", "goal", "obstacles"}
_REQUIRED_KEYS = {"format_version", "bounds", "start", "goal"}


def _floats(value, n, what):
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise WorldFormatError(f"{what} must be a list of {n} numbers, got {value!r}")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise WorldFormatError(f"{what} must be numeric: {value!r}") from exc


def load_world(text: str) -> World:
    """Parse and validate a JSON world document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorldFormatError(f"malformed world document: {exc}") from exc
    if not isinstance(doc, dict):
        raise WorldFormatError("world document must be a JSON object")
    unknown = set(doc) - _WORLD_KEYS
    if unknown:
        raise WorldFormatError(f"unknown world keys: {sorted(unknown)}")
    missing = _REQUIRED_KEYS - set(doc)
    if missing:
        raise WorldFormatError(f"missing world keys: {sorted(missing)}")
    if doc["format_version"] != WORLD_FORMAT_VERSION:
        raise WorldFormatError(f"unsupported format_version {doc['format_version']!r}")

    obstacles = []
    for i, ob in enumerate(doc.get("obstacles", [])):
        if not isinstance(ob, dict) or set(ob) != {"type", "params"}:
            raise WorldFormatError(f"obstacle {i} must have exactly the keys 'type' and 'params'")
        if ob["type"] == "circle":
            obstacles.append(Circle(*_floats(ob["params"], 3, f"obstacle {i} params")))
        elif ob["type"] == "rect":
            obstacles.append(Rect(*_floats(ob["params"], 4, f"obstacle {i} params")))
        else:
            raise WorldFormatError(f"obstacle {i}: unknown type {ob['type']!r}")

    try:
        world = World(
            bounds=_floats(doc["bounds"], 4, "bounds"),
            obstacles=tuple(obstacles),
            start_pose=_floats(doc["start"], 3, "start"),
            goal=_floats(doc["goal"], 2, "goal"),
            goal_radius=float(doc.get("goal_radius", 0.3)),
            robot_radius=float(doc.get("robot_radius", 0.2)),
            name=str(doc.get("name", "")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, WorldFormatError):
            raise
        raise WorldFormatError(str(exc)) from exc
    return world.validate()


def load_world_file(path) -> World:
    path = Path(path)
    if not path.exists() and (WORLDS_DIR / path.name).exists():
        path = WORLDS_DIR / path.name
    return load_world(path.read_text())


def bundled_world(name: str) -> World:
    return load_world((WORLDS_DIR / f"{name}.world").read_text())


def dump_world(world: World) -> str:
    obstacles = []
    for o in world.obstacles:
        if isinstance(o, Circle):
            obstacles.append({"type": "circle", "params": [o.cx, o.cy, o.r]})
        else:
            obstacles.append({"type": "rect", "params": [o.xmin, o.ymin, o.xmax, o.ymax]})
    return json.dumps({
        "format_version": WORLD_FORMAT_VERSION,
        "name": world.name,
        "bounds": list(world.bounds),
        "robot_radius": world.robot_radius,
        "goal_radius": world.goal_radius,
        "start": list(world.start_pose),
        "goal": list(world.goal),
        "obstacles": obstacles,
    }, indent=2)


def raycast_scan(pose: Pose, world: World, n_beams: int = 20, fov: float = math.pi,
                 max_range: float = 7.0) -> np.ndarray:
    if n_beams < 1:
        raise ValueError("n_beams must be >= 1")
    if not (0.0 < fov <= 2.0 * math.pi):
        raise ValueError("fov must lie in (0, 2*pi]")
    return kernels.raycast(pose.x, pose.y, pose.heading, world.bounds_array, world.circles,
                           world.rects, n_beams, fov, max_range)


def min_obstacle_distance(pose: Pose, world: World, subtract_radius: bool = True) -> float:
    """Clearance from the robot to the nearest obstacle or wall, never negative."""
    d = world.surface_distance(pose.x, pose.y)
    if subtract_radius:
        d -= world.robot_radius
    return d if d > 0.0 else 0.0


class Outcome(enum.Enum):
    RUNNING = "running"
    GOAL_REACHED = "goal"
    COLLISION = "collision"
    TIMEOUT = "timeout"

    @property
    def terminal(self) -> bool:
        return self is not Outcome.RUNNING


@dataclass(frozen=True)
class StepOutcome:
    kind: Outcome
    steps_elapsed: int


@dataclass(frozen=True)
class Observation:
    scan: np.ndarray
    goal_distance: float
    goal_bearing: float
    last_action: tuple[float, float]

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.scan, [self.goal_distance, self.goal_bearing,
                                           self.last_action[0], self.last_action[1]]])

    @property
    def d_min(self) -> float:
        return float(self.scan.min())


@dataclass
class EnvConfig:
    dt: float = 0.1
    max_steps: int = 500
    n_beams: int = 20
    fov_deg: float = 180.0
    max_range: float = 7.0
    start_jitter: float = 0.0
    heading_jitter: float = 0.0
    randomize_start: bool = False
    randomize_goal: bool = False
    min_goal_distance: float = 2.0
    spawn_margin: float = 0.3
    subtract_radius: bool = True

    @property
    def fov(self) -> float:
        return math.radians(self.fov_deg)

    @property
    def obs_dim(self) -> int:
        return self.n_beams + 4


@dataclass
class NavEnv:
    """One mutable episode over an immutable World."""

    world: World
    config: EnvConfig = field(default_factory=EnvConfig)

    def __post_init__(self):
        self.pose = Pose(*self.world.start_pose)
        self.goal = tuple(self.world.goal)
        self.start = self.pose
        self.steps = 0
        self.last_action = (0.0, 0.0)
        self.outcome = StepOutcome(Outcome.RUNNING, 0)
        self._finished = True

    def _sample_free(self, rng, margin):
        xmin, ymin, xmax, ymax = self.world.bounds
        for _ in range(10_000):
            x = rng.uniform(xmin + margin, xmax - margin)
            y = rng.uniform(ymin + margin, ymax - margin)
            if self.world.is_free(x, y, margin):
                return x, y
        raise WorldValidationError("could not sample a free position")

    def reset(self, seed: int) -> Observation:
        cfg = self.config
        rng = np.random.default_rng(seed)
        margin = self.world.robot_radius + cfg.spawn_margin
        sx, sy, sh = self.world.start_pose
        if cfg.randomize_start:
            sx, sy = self._sample_free(rng, margin)
            sh = rng.uniform(-math.pi, math.pi)
        elif cfg.start_jitter > 0 or cfg.heading_jitter > 0:
            for _ in range(1000):
                jx = sx + rng.uniform(-cfg.start_jitter, cfg.start_jitter)
                jy = sy + rng.uniform(-cfg.start_jitter, cfg.start_jitter)
                if self.world.is_free(jx, jy):
                    sx, sy = jx, jy
                    break
            sh = sh + rng.uniform(-cfg.heading_jitter, cfg.heading_jitter)
        goal = tuple(self.world.goal)
        if cfg.randomize_goal:
            for _ in range(10_000):
                gx, gy = self._sample_free(rng, margin)
                if math.hypot(gx - sx, gy - sy) >= cfg.min_goal_distance:
                    goal = (gx, gy)
                    break
            else:
                raise WorldValidationError("could not sample a goal far enough from the start")
        self.pose = Pose(float(sx), float(sy), wrap_angle(float(sh)))
        self.start = self.pose
        self.goal = (float(goal[0]), float(goal[1]))
        self.steps = 0
        self.last_action = (0.0, 0.0)
        self.outcome = StepOutcome(Outcome.RUNNING, 0)
        self._finished = False
        return self.observe()

    def scan(self) -> np.ndarray:
        return raycast_scan(self.pose, self.world, self.config.n_beams, self.config.fov,
                            self.config.max_range)

    def observe(self) -> Observation:
        dx = self.goal[0] - self.pose.x
        dy = self.goal[1] - self.pose.y
        return Observation(
            scan=self.scan(),
            goal_distance=math.sqrt(dx * dx + dy * dy),
            goal_bearing=wrap_angle(math.atan2(dy, dx) - self.pose.heading),
            last_action=self.last_action,
        )

    def clearance(self) -> float:
        return min_obstacle_distance(self.pose, self.world, self.config.subtract_radius)

    def collided(self) -> bool:
        return self.world.surface_distance(self.pose.x, self.pose.y) <= self.world.robot_radius

    def step(self, action: Action, dt: float | None = None) -> tuple[Observation, StepOutcome]:
        if self._finished:
            raise EpisodeFinishedError("step() called on a finished episode; call reset() first")
        if dt is None:
            dt = self.config.dt
        a = action.clamped()
        p = self.pose
        x = p.x + a.linear * math.cos(p.heading) * dt
        y = p.y + a.linear * math.sin(p.heading) * dt
        heading = wrap_angle(p.heading + a.angular * dt)
        self.pose = Pose(x, y, heading)
        self.last_action = (a.linear, a.angular)
        self.steps += 1

        gx, gy = self.goal
        if math.sqrt((x - gx) ** 2 + (y - gy) ** 2) <= self.world.goal_radius:
            kind = Outcome.GOAL_REACHED
        elif self.collided():
            kind = Outcome.COLLISION
        elif self.steps >= self.config.max_steps:
            kind = Outcome.TIMEOUT
        else:
            kind = Outcome.RUNNING
        self.outcome = StepOutcome(kind, self.steps)
        self._finished = kind.terminal
        return self.observe(), self.outcome

    @property
    def finished(self) -> bool:
        return self._finished
