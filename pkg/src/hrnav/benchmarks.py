"""Evaluation metrics, seeded evaluation of frozen policies, and an A* reference planner."""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .agents import DqnAgent, Td3Agent
from .hierarchy import (DqnHighPolicy, GoalPointingHighPolicy, HierarchyConfig, PursuitLowPolicy,
                        RandomHighPolicy, Td3LowPolicy, UniformLowPolicy, configs_from_meta, episode_seed,
                        run_episode)
from .neuralnet import load_checkpoint
from .simworld import Circle, EnvConfig, NavEnv, Outcome, Rect, World

SMOOTHNESS_DEFINITION = "smoothness = 1 - mean(|change in segment heading|, degrees) / 180"


def _points(trajectory) -> np.ndarray:
    pts = np.asarray(trajectory, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] < 2:
        raise ValueError("trajectory must be a sequence of (x, y) points")
    return pts[:, :2]


def path_length(trajectory) -> float:
    pts = _points(trajectory)
    return float(np.sum(np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))))


def path_efficiency(trajectory, start, goal, reference_length: float | None = None) -> float:
    """Reference length over travelled length.

    The travelled path runs from ``start`` through the trajectory points and
    is closed to ``goal`` (an episode ends inside the goal radius, not on the
    goal point), so with the Euclidean reference the ratio never exceeds 1.
    """
    pts = _points(trajectory)
    if len(pts) == 0:
        raise ValueError("empty trajectory")
    path = np.vstack([np.asarray(start, dtype=np.float64)[:2], pts, np.asarray(goal, dtype=np.float64)[:2]])
    travelled = path_length(path)
    if travelled <= 0.0:
        raise ValueError("zero travelled length")
    ref = math.hypot(goal[0] - start[0], goal[1] - start[1]) if reference_length is None else reference_length
    return ref / travelled


def trajectory_smoothness(trajectory) -> float:
    """1 minus the mean absolute heading change between consecutive segments, over 180 degrees.

    Zero-length segments (the robot standing still) carry no heading and are
    skipped.
    """
    pts = _points(trajectory)
    if len(pts) < 3:
        raise ValueError("smoothness needs at least 3 points")
    d = np.diff(pts, axis=0)
    moving = np.hypot(d[:, 0], d[:, 1]) > 1e-12
    headings = np.degrees(np.arctan2(d[moving, 1], d[moving, 0]))
    if len(headings) < 2:
        return 1.0
    turns = (np.diff(headings) + 180.0) % 360.0 - 180.0
    turns = np.where(turns == -180.0, 180.0, turns)
    return float(1.0 - np.mean(np.abs(turns)) / 180.0)


# --- A* ----------------------------------------------------------------------

@dataclass
class Grid:
    blocked: np.ndarray  # (nx, ny) bool
    origin: tuple[float, float]
    resolution: float

    def cell(self, x: float, y: float) -> tuple[int, int]:
        i = int(math.floor((x - self.origin[0]) / self.resolution))
        j = int(math.floor((y - self.origin[1]) / self.resolution))
        nx, ny = self.blocked.shape
        return min(max(i, 0), nx - 1), min(max(j, 0), ny - 1)


def rasterize(world: World, resolution: float = 0.1, inflate: float | None = None) -> Grid:
    """Occupancy grid; a cell is blocked when its square comes closer than ``inflate``
    (default robot radius) to an obstacle or to the arena boundary."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    inflate = world.robot_radius if inflate is None else inflate
    xmin, ymin, xmax, ymax = world.bounds
    nx = int(math.ceil((xmax - xmin) / resolution - 1e-9))
    ny = int(math.ceil((ymax - ymin) / resolution - 1e-9))
    lo_x = xmin + np.arange(nx) * resolution
    lo_y = ymin + np.arange(ny) * resolution
    cx0, cy0 = np.meshgrid(lo_x, lo_y, indexing="ij")
    cx1, cy1 = np.minimum(cx0 + resolution, xmax), np.minimum(cy0 + resolution, ymax)
    blocked = (cx0 < xmin + inflate) | (cy0 < ymin + inflate) | (cx1 > xmax - inflate) | (cy1 > ymax - inflate)
    for o in world.obstacles:
        if isinstance(o, Circle):
            dx = np.maximum(np.maximum(cx0 - o.cx, o.cx - cx1), 0.0)
            dy = np.maximum(np.maximum(cy0 - o.cy, o.cy - cy1), 0.0)
            blocked |= np.hypot(dx, dy) < o.r + inflate
        elif isinstance(o, Rect):
            dx = np.maximum(np.maximum(cx0 - o.xmax, o.xmin - cx1), 0.0)
            dy = np.maximum(np.maximum(cy0 - o.ymax, o.ymin - cy1), 0.0)
            blocked |= np.hypot(dx, dy) < inflate
    return Grid(blocked, (xmin, ymin), resolution)


_MOVES = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
SQRT2 = math.sqrt(2.0)


def grid_neighbors(blocked: np.ndarray, i: int, j: int):
    """8-connected free neighbours with step cost in cells; diagonals may not cut corners."""
    nx, ny = blocked.shape
    for di, dj in _MOVES:
        a, b = i + di, j + dj
        if not (0 <= a < nx and 0 <= b < ny) or blocked[a, b]:
            continue
        if di and dj:
            if blocked[i + di, j] or blocked[i, j + dj]:
                continue
            yield a, b, SQRT2
        else:
            yield a, b, 1.0


def octile(a, b) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def astar_grid(blocked: np.ndarray, start: tuple[int, int], goal: tuple[int, int]) -> float | None:
    """Shortest 8-connected path cost in cells, or None when unreachable."""
    if blocked[start] or blocked[goal]:
        raise ValueError("start or goal cell is blocked")
    best = {start: 0.0}
    heap = [(octile(start, goal), 0, 0.0, start)]
    counter = 1
    closed = set()
    while heap:
        _, _, g, node = heapq.heappop(heap)
        if node == goal:
            return g
        if node in closed:
            continue
        closed.add(node)
        for a, b, cost in grid_neighbors(blocked, *node):
            ng = g + cost
            if ng < best.get((a, b), math.inf):
                best[(a, b)] = ng
                heapq.heappush(heap, (ng + octile((a, b), goal), counter, ng, (a, b)))
                counter += 1
    return None


@dataclass(frozen=True)
class AStarResult:
    reachable: bool
    length: float  # metres between the start and goal cell centres; inf when unreachable
    cells: float  # path cost in cell units


def astar_reference(world: World, resolution: float = 0.1, start=None, goal=None,
                    inflate: float | None = None) -> AStarResult:
    grid = rasterize(world, resolution, inflate)
    start = world.start_pose[:2] if start is None else start
    goal = world.goal if goal is None else goal
    cost = astar_grid(grid.blocked, grid.cell(*start), grid.cell(*goal))
    if cost is None:
        return AStarResult(False, math.inf, math.inf)
    return AStarResult(True, cost * resolution, cost)


# --- evaluation --------------------------------------------------------------

@dataclass
class PolicyBundle:
    """Frozen policies plus the configuration they were trained under."""

    name: str
    low: object
    high: object | None = None
    hierarchy: HierarchyConfig = field(default_factory=HierarchyConfig)
    env_config: EnvConfig = field(default_factory=EnvConfig)

    @property
    def flat(self) -> bool:
        return self.high is None

    @classmethod
    def from_agents(cls, name, td3: Td3Agent, dqn: DqnAgent | None, hierarchy=None, env_config=None):
        high = DqnHighPolicy(dqn, greedy=True) if dqn is not None else None
        return cls(name, Td3LowPolicy(td3, explore=False), high, hierarchy or HierarchyConfig(),
                   env_config or EnvConfig())

    @classmethod
    def from_trainer(cls, trainer, name: str | None = None):
        return cls.from_agents(name or trainer.train_config.mode, trainer.td3, trainer.dqn,
                               trainer.hierarchy, trainer.env_config)

    @classmethod
    def from_checkpoint(cls, path, name: str | None = None):
        entries, meta = load_checkpoint(path)
        try:
            cfgs = configs_from_meta(meta)
            td3 = Td3Agent.from_state(entries, meta["td3"])
            dqn = DqnAgent.from_state(entries, meta["dqn"]) if meta.get("kind") == "hierarchy" else None
        except (KeyError, TypeError) as exc:
            from .neuralnet import CheckpointError
            raise CheckpointError(f"checkpoint {path} is missing agent state: {exc}") from exc
        return cls.from_agents(name or meta["kind"], td3, dqn, cfgs["hierarchy"], cfgs["env_config"])

    def with_random_high(self, name: str | None = None) -> "PolicyBundle":
        """Ablation: same low level, uniformly random subgoals."""
        return PolicyBundle(name or f"{self.name}+random_high", self.low, RandomHighPolicy(self.hierarchy.n_actions),
                            self.hierarchy, self.env_config)

    def with_goal_pointing_high(self, name: str | None = None) -> "PolicyBundle":
        return PolicyBundle(name or f"{self.name}+goal_high", self.low, GoalPointingHighPolicy(self.hierarchy),
                            self.hierarchy, self.env_config)


def scripted_bundle(kind: str, env_config: EnvConfig | None = None) -> PolicyBundle:
    """Baselines: "straight" turns to face the goal and drives at it, "random" drives uniformly at random."""
    if kind == "straight":
        return PolicyBundle("straight", PursuitLowPolicy(align_tol=0.05), None, env_config=env_config or EnvConfig())
    if kind == "random":
        return PolicyBundle("random", UniformLowPolicy(), None, env_config=env_config or EnvConfig())
    raise ValueError(f"unknown scripted policy {kind!r}")


@dataclass
class EpisodeMetrics:
    episode: int
    seed: int
    world: str
    outcome: str
    steps: int
    time_to_goal: float | None
    path_length: float
    path_efficiency: float | None
    astar_efficiency: float | None
    smoothness: float | None


REPORT_HEADER = ["episode", "seed", "world", "outcome", "steps", "time_to_goal", "path_length",
                 "path_efficiency", "astar_efficiency", "smoothness"]


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else None


@dataclass
class MetricsReport:
    name: str
    rows: list

    @property
    def episodes(self) -> int:
        return len(self.rows)

    def _rate(self, outcome: Outcome) -> float:
        return sum(r.outcome == outcome.value for r in self.rows) / max(len(self.rows), 1)

    @property
    def success_rate(self) -> float:
        return self._rate(Outcome.GOAL_REACHED)

    @property
    def collision_rate(self) -> float:
        return self._rate(Outcome.COLLISION)

    @property
    def timeout_rate(self) -> float:
        return self._rate(Outcome.TIMEOUT)

    @property
    def mean_time_to_goal(self):
        return _mean(r.time_to_goal for r in self.rows)

    @property
    def mean_path_efficiency(self):
        return _mean(r.path_efficiency for r in self.rows)

    @property
    def mean_astar_efficiency(self):
        return _mean(r.astar_efficiency for r in self.rows)

    @property
    def mean_smoothness(self):
        return _mean(r.smoothness for r in self.rows)

    def summary(self) -> dict:
        return {
            "name": self.name, "episodes": self.episodes, "success_rate": self.success_rate,
            "collision_rate": self.collision_rate, "timeout_rate": self.timeout_rate,
            "mean_time_to_goal": self.mean_time_to_goal, "mean_path_efficiency": self.mean_path_efficiency,
            "mean_astar_efficiency": self.mean_astar_efficiency, "mean_smoothness": self.mean_smoothness,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.rows:
            w.writerow(["" if getattr(r, k) is None else (repr(getattr(r, k)) if isinstance(getattr(r, k), float)
                                                           else getattr(r, k)) for k in REPORT_HEADER])
        return buf.getvalue()

    def summary_text(self) -> str:
        lines = [f"# {SMOOTHNESS_DEFINITION}", "# timeouts count in the rates only"]
        for k, v in self.summary().items():
            lines.append(f"{k}: {'n/a' if v is None else (f'{v:.6f}' if isinstance(v, float) else v)}")
        return "\n".join(lines) + "\n"


def evaluate(bundle: PolicyBundle, worlds: list[World], n_episodes: int, seed: int,
             env_config: EnvConfig | None = None, astar_resolution: float | None = None) -> MetricsReport:
    """Seeded greedy episodes cycling over ``worlds``; a pure function of its arguments."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    cfg = env_config or bundle.env_config
    envs = [NavEnv(w, cfg) for w in worlds]
    astar_cache = {}
    rows = []
    for i in range(n_episodes):
        env = envs[i % len(envs)]
        s = episode_seed(seed, i, stream=1)
        rec = run_episode(env, bundle.high, bundle.low, bundle.hierarchy, np.random.default_rng(s), s, i,
                          flat=bundle.flat)
        pts = rec.positions()
        start, goal = pts[0], rec.goal
        success = rec.outcome is Outcome.GOAL_REACHED
        eff = path_efficiency(pts[1:], start, goal) if success else None
        a_eff = None
        if success and astar_resolution:
            key = (env.world.name, tuple(start), tuple(goal))
            if key not in astar_cache:
                astar_cache[key] = astar_reference(env.world, astar_resolution, start, goal)
            ref = astar_cache[key]
            a_eff = path_efficiency(pts[1:], start, goal, ref.length) if ref.reachable else None
        smooth = trajectory_smoothness(pts) if rec.outcome is not Outcome.TIMEOUT and len(pts) >= 3 else None
        rows.append(EpisodeMetrics(i, s, env.world.name, rec.outcome.value, rec.steps,
                                   rec.steps * cfg.dt if success else None, path_length(pts), eff, a_eff, smooth))
    return MetricsReport(bundle.name, rows)


def comparison_table(reports: list[MetricsReport]) -> tuple[str, str]:
    """Side-by-side summaries as (CSV, aligned text)."""
    keys = list(reports[0].summary().keys())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for rep in reports:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in rep.summary().values()])
    width = max(len(k) for k in keys)
    names = [rep.name for rep in reports]
    colw = max(12, *(len(n) for n in names))
    lines = [" " * width + "  " + "  ".join(n.rjust(colw) for n in names)]
    for k in keys[1:]:
        cells = []
        for rep in reports:
            v = rep.summary()[k]
            cells.append(("n/a" if v is None else (f"{v:.4f}" if isinstance(v, float) else str(v))).rjust(colw))
        lines.append(k.ljust(width) + "  " + "  ".join(cells))
    return buf.getvalue(), "\n".join(lines) + "\n"
