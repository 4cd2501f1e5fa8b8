"""High-level DQN subgoal selection over a low-level TD3 controller.

The DQN picks one of ``n_bearings * len(distance_bins)`` discrete subgoals
(bearing relative to the current heading, distance in metres). The TD3 policy
sees the scan plus the subgoal's polar coordinates and drives toward it. A
subgoal lives until it is reached or its horizon runs out; one high-level
transition is stored per subgoal, discounted by gamma**k over the k low-level
steps it consumed.

``Trainer`` also runs the flat (TD3-only) baseline, where the goal itself
plays the role of a single subgoal.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import rewards as R
from .agents import DqnAgent, DqnConfig, Td3Agent, Td3Config
from .neuralnet import load_checkpoint, save_checkpoint
from .replay import ReplayBuffer
from .simworld import Action, EnvConfig, NavEnv, Outcome, Pose, World, wrap_angle

TRAINING_MODES = ("joint", "alternating", "frozen_high", "frozen_low")
DIST_SCALE = 10.0


@dataclass
class HierarchyConfig:
    n_bearings: int = 8
    distance_bins: tuple = (1.0, 2.0)
    horizon: int = 50
    subgoal_radius: float = 0.3
    training_mode: str = "alternating"
    snap_to_goal: bool = True
    # weight on the terminal +-100 environment reward added to the high-level reward
    terminal_weight: float = 1.0
    # alternating mode: TD3 pretraining on random subgoals, DQN with TD3 frozen, joint
    phase_fractions: tuple = (0.4, 0.4, 0.2)
    obstacle_threshold: float = 1.0
    obstacle_cone_deg: float = 15.0

    def __post_init__(self):
        self.distance_bins = tuple(float(d) for d in self.distance_bins)
        self.phase_fractions = tuple(float(f) for f in self.phase_fractions)
        if self.n_bearings < 2:
            raise ValueError("n_bearings must be >= 2")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.distance_bins or any(d <= 0 for d in self.distance_bins) or \
                list(self.distance_bins) != sorted(set(self.distance_bins)):
            raise ValueError("distance_bins must be positive and strictly ascending")
        if self.training_mode not in TRAINING_MODES:
            raise ValueError(f"training_mode must be one of {TRAINING_MODES}")
        if len(self.phase_fractions) != 3 or any(f < 0 for f in self.phase_fractions) \
                or abs(sum(self.phase_fractions) - 1.0) > 1e-9:
            raise ValueError("phase_fractions must be three non-negative fractions summing to 1")

    @property
    def n_actions(self) -> int:
        return self.n_bearings * len(self.distance_bins)


# --- subgoals ----------------------------------------------------------------

@dataclass(frozen=True)
class Subgoal:
    index: int
    bearing_offset: float  # degrees, relative to heading at issuance
    distance: float  # effective metres from origin to absolute_target
    absolute_target: tuple[float, float]
    origin: tuple[float, float]
    heading_at_issue: float
    issued_at_step: int = 0
    snapped: bool = False


class SubgoalStatus(enum.Enum):
    ACTIVE = "active"
    REACHED = "reached"
    EXPIRED = "expired"


def subgoal_decode(index: int, pose: Pose, config: HierarchyConfig, bounds=None, margin: float = 0.0,
                   goal=None, issued_at_step: int = 0) -> Subgoal:
    """Turn a discrete action into an absolute subgoal.

    ``index // len(distance_bins)`` selects the bearing, the remainder the
    distance. The target is clamped into ``bounds`` shrunk by ``margin``. With
    ``goal`` given and ``snap_to_goal`` on, a goal lying inside the chosen
    bearing sector and within reach replaces the target.
    """
    n_d = len(config.distance_bins)
    if not 0 <= index < config.n_actions:
        raise ValueError(f"subgoal index {index} outside [0, {config.n_actions})")
    ib, idist = divmod(int(index), n_d)
    bearing = -180.0 + ib * (360.0 / config.n_bearings)
    dist = config.distance_bins[idist]
    theta = pose.heading + math.radians(bearing)
    tx = pose.x + dist * math.cos(theta)
    ty = pose.y + dist * math.sin(theta)
    snapped = False
    if goal is not None and config.snap_to_goal:
        gdx, gdy = goal[0] - pose.x, goal[1] - pose.y
        gdist = math.hypot(gdx, gdy)
        gbear = math.degrees(wrap_angle(math.atan2(gdy, gdx) - pose.heading))
        sector = 180.0 / config.n_bearings
        if gdist <= dist + config.subgoal_radius and abs(R.normalize_degrees(gbear - bearing)) <= sector:
            tx, ty = float(goal[0]), float(goal[1])
            snapped = True
    if bounds is not None:
        xmin, ymin, xmax, ymax = bounds
        tx = min(max(tx, xmin + margin), xmax - margin)
        ty = min(max(ty, ymin + margin), ymax - margin)
    eff = math.hypot(tx - pose.x, ty - pose.y)
    return Subgoal(int(index), bearing, eff, (tx, ty), (pose.x, pose.y), pose.heading,
                   issued_at_step, snapped)


def subgoal_status(pose: Pose, subgoal: Subgoal, steps_since_issue: int,
                   config: HierarchyConfig) -> SubgoalStatus:
    tx, ty = subgoal.absolute_target
    if math.hypot(pose.x - tx, pose.y - ty) <= config.subgoal_radius:
        return SubgoalStatus.REACHED
    if steps_since_issue >= config.horizon:
        return SubgoalStatus.EXPIRED
    return SubgoalStatus.ACTIVE


def high_level_inputs(segment, subgoal: Subgoal, scan, fov: float, config: HierarchyConfig,
                      previous_bearing: float = 0.0, collided: bool = False) -> R.HighRewardInputs:
    """Reward inputs for a finished subgoal.

    ``segment`` holds the (x, y) positions visited during the subgoal's life,
    starting at its origin. A segment with zero net displacement scores the
    worst direction (180 degrees).
    """
    x0, y0 = segment[0][0], segment[0][1]
    x1, y1 = segment[-1][0], segment[-1][1]
    dx, dy = x1 - x0, y1 - y0
    d_actual = math.hypot(dx, dy)
    tx, ty = subgoal.absolute_target
    target_dir = math.atan2(ty - subgoal.origin[1], tx - subgoal.origin[0])
    if d_actual == 0.0:
        theta_diff = 180.0
    else:
        theta_diff = R.degrees_between(math.atan2(dy, dx), target_dir)
    return R.HighRewardInputs(
        theta_diff=theta_diff,
        d_actual=d_actual,
        d_target=max(subgoal.distance, 1e-9),
        obstacle_ahead=R.obstacle_ahead(scan, fov, config.obstacle_threshold, config.obstacle_cone_deg),
        delta_theta=R.normalize_degrees(subgoal.bearing_offset - previous_bearing),
        collided=collided,
    )


def goal_subgoal(pose: Pose, goal) -> Subgoal:
    """The final goal wrapped as a subgoal (flat mode)."""
    dx, dy = goal[0] - pose.x, goal[1] - pose.y
    bearing = math.degrees(wrap_angle(math.atan2(dy, dx) - pose.heading))
    return Subgoal(-1, bearing, math.hypot(dx, dy), (float(goal[0]), float(goal[1])),
                   (pose.x, pose.y), pose.heading, 0, True)


# --- features ----------------------------------------------------------------

def policy_features(scan, distance: float, bearing: float, last_action, max_range: float) -> np.ndarray:
    """Network input: scaled scan, target distance and bearing, last action in [-1, 1]."""
    out = np.empty(len(scan) + 4)
    out[:-4] = np.asarray(scan) / max_range
    out[-4] = distance / DIST_SCALE
    out[-3] = bearing / math.pi
    out[-2] = 2.0 * last_action[0] - 1.0
    out[-1] = last_action[1]
    return out


def high_features(obs, env_cfg: EnvConfig) -> np.ndarray:
    return policy_features(obs.scan, obs.goal_distance, obs.goal_bearing, obs.last_action, env_cfg.max_range)


def low_features(obs, pose: Pose, subgoal: Subgoal, env_cfg: EnvConfig) -> np.ndarray:
    tx, ty = subgoal.absolute_target
    dx, dy = tx - pose.x, ty - pose.y
    return policy_features(obs.scan, math.hypot(dx, dy), wrap_angle(math.atan2(dy, dx) - pose.heading),
                           obs.last_action, env_cfg.max_range)


# --- policies ----------------------------------------------------------------

class DqnHighPolicy:
    def __init__(self, agent: DqnAgent, greedy: bool):
        self.agent, self.greedy = agent, greedy

    def __call__(self, features, env, rng):
        return self.agent.select_action(features, rng, greedy=self.greedy)


class RandomHighPolicy:
    def __init__(self, n_actions: int):
        self.n_actions = n_actions

    def __call__(self, features, env, rng):
        return int(rng.integers(self.n_actions))


class GoalPointingHighPolicy:
    """Scripted: bearing bin nearest the goal direction, longest distance bin."""

    def __init__(self, config: HierarchyConfig):
        self.config = config

    def __call__(self, features, env, rng):
        c = self.config
        gx, gy = env.goal
        p = env.pose
        bearing = math.degrees(wrap_angle(math.atan2(gy - p.y, gx - p.x) - p.heading))
        step = 360.0 / c.n_bearings
        ib = int(round((bearing + 180.0) / step)) % c.n_bearings
        return ib * len(c.distance_bins) + len(c.distance_bins) - 1


class Td3LowPolicy:
    def __init__(self, agent: Td3Agent, explore: bool):
        self.agent, self.explore = agent, explore

    def __call__(self, features, env, subgoal, rng):
        return self.agent.act(features, rng, explore=self.explore)


class UniformLowPolicy:
    def __call__(self, features, env, subgoal, rng):
        return rng.uniform(-1.0, 1.0, size=2)


class PursuitLowPolicy:
    """Scripted proportional pursuit of the subgoal target (normalised actions).

    With ``align_tol`` (radians) set, the robot turns in place until the
    heading error drops below it and only then drives.
    """

    def __init__(self, gain: float = 2.0, align_tol: float | None = None):
        self.gain, self.align_tol = gain, align_tol

    def __call__(self, features, env, subgoal, rng):
        p = env.pose
        tx, ty = subgoal.absolute_target
        err = wrap_angle(math.atan2(ty - p.y, tx - p.x) - p.heading)
        ang = max(-1.0, min(1.0, self.gain * err))
        lin = max(0.0, math.cos(err)) if abs(err) < math.pi / 2 else 0.0
        if self.align_tol is not None and abs(err) > self.align_tol:
            lin = 0.0
        return Td3Agent.from_env([lin, ang])


# --- episode -----------------------------------------------------------------

@dataclass
class StepRow:
    step: int
    x: float
    y: float
    heading: float
    linear: float
    angular: float
    r_env: float
    r_low: float
    subgoal_id: int
    outcome: str


@dataclass
class SubgoalRow:
    subgoal_id: int
    index: int
    issued_at: int
    steps: int
    bearing_offset: float
    distance: float
    target_x: float
    target_y: float
    status: str
    r_high: float
    r_high_train: float
    obs: np.ndarray = field(repr=False, default=None)
    next_obs: np.ndarray = field(repr=False, default=None)


@dataclass
class EpisodeRecord:
    episode: int
    seed: int
    world: str
    start: tuple
    goal: tuple
    outcome: Outcome = Outcome.RUNNING
    rows: list = field(default_factory=list)
    subgoals: list = field(default_factory=list)
    ep_reward_low: float = 0.0
    ep_reward_high: float = 0.0
    ep_reward_env: float = 0.0

    @property
    def steps(self) -> int:
        return len(self.rows)

    def positions(self) -> np.ndarray:
        pts = [(self.start[0], self.start[1])] + [(r.x, r.y) for r in self.rows]
        return np.array(pts)

    def headings(self) -> np.ndarray:
        return np.array([self.start[2]] + [r.heading for r in self.rows])

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "x", "y", "heading", "linear", "angular", "r_env", "r_low", "subgoal_id", "outcome"])
        for r in self.rows:
            w.writerow([r.step, repr(r.x), repr(r.y), repr(r.heading), repr(r.linear), repr(r.angular),
                        repr(r.r_env), repr(r.r_low), r.subgoal_id, r.outcome])
        return buf.getvalue()

    def subgoal_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["subgoal_id", "index", "issued_at", "steps", "bearing_offset", "distance",
                    "target_x", "target_y", "status", "r_high"])
        for s in self.subgoals:
            w.writerow([s.subgoal_id, s.index, s.issued_at, s.steps, repr(s.bearing_offset),
                        repr(s.distance), repr(s.target_x), repr(s.target_y), s.status, repr(s.r_high)])
        return buf.getvalue()


@dataclass
class RewardConfig:
    high: R.HighRewardWeights = field(default_factory=R.HighRewardWeights)
    low: R.LowRewardWeights = field(default_factory=R.LowRewardWeights)


def run_episode(env: NavEnv, high_policy, low_policy, config: HierarchyConfig, rng: np.random.Generator,
                seed: int, episode: int = 0, reward_config: RewardConfig | None = None,
                learner=None, flat: bool = False, flat_reward: str = "env") -> EpisodeRecord:
    """Roll out one episode.

    With ``flat=True`` no high-level policy is consulted and the low level
    tracks the goal directly; ``flat_reward`` then selects whether it learns
    from the environment reward alone ("env") or from the full low-level
    reward against the goal ("low"). ``learner`` (optional) receives
    transitions and the per-timestep tick that drives the update cadence.
    """
    rc = reward_config or RewardConfig()
    ecfg = env.config
    obs = env.reset(seed)
    rec = EpisodeRecord(episode, seed, env.world.name, (env.pose.x, env.pose.y, env.pose.heading), env.goal)
    bounds = env.world.bounds
    margin = env.world.robot_radius
    subgoal = None
    sub_id = -1
    prev_bearing = 0.0
    status = SubgoalStatus.ACTIVE
    hi_obs = hi_action = None
    segment = []
    steps_in = 0

    if flat:
        subgoal = goal_subgoal(env.pose, env.goal)
        sub_id = 0
        segment = [(env.pose.x, env.pose.y)]

    while True:
        if not flat and (subgoal is None or status is not SubgoalStatus.ACTIVE):
            hi_obs = high_features(obs, ecfg)
            hi_action = int(high_policy(hi_obs, env, rng))
            sub_id += 1
            subgoal = subgoal_decode(hi_action, env.pose, config, bounds, margin, env.goal, env.steps)
            segment = [(env.pose.x, env.pose.y)]
            steps_in = 0
            status = SubgoalStatus.ACTIVE

        lo_obs = low_features(obs, env.pose, subgoal, ecfg)
        u = np.asarray(low_policy(lo_obs, env, subgoal, rng), dtype=np.float64)
        lin, ang = Td3Agent.to_env(u)
        lin, ang = float(lin), float(ang)
        obs2, out = env.step(Action(lin, ang))
        kind = out.kind
        collided = kind is Outcome.COLLISION
        done = kind in (Outcome.GOAL_REACHED, Outcome.COLLISION)
        steps_in += 1
        segment.append((env.pose.x, env.pose.y))
        if not flat and not kind.terminal:
            status = subgoal_status(env.pose, subgoal, steps_in, config)
        ended = kind.terminal or status is not SubgoalStatus.ACTIVE

        # direction and distance terms are paid once, when the subgoal's life ends
        inputs = None
        r_dir = r_dist = 0.0
        if ended:
            inputs = high_level_inputs(segment, subgoal, obs2.scan, ecfg.fov, config, prev_bearing, collided)
            r_dir = R.direction_reward(inputs.theta_diff)
            r_dist = R.distance_reward(inputs.d_actual, inputs.d_target)
        r_env = R.env_reward(kind, lin, ang, env.clearance())
        r_low = R.low_level_reward(r_env, r_dir, r_dist, collided, rc.low)
        if learner is not None:
            r_train = r_env if (flat and flat_reward == "env") else r_low
            learner.on_low(lo_obs, np.clip(u, -1.0, 1.0), r_train,
                           low_features(obs2, env.pose, subgoal, ecfg), done)
        rec.ep_reward_env += r_env
        rec.ep_reward_low += r_env if (flat and flat_reward == "env") else r_low
        rec.rows.append(StepRow(env.steps, env.pose.x, env.pose.y, env.pose.heading, lin, ang,
                                r_env, r_low, sub_id, kind.value))

        if not flat and ended:
            r_high = R.high_level_reward(inputs, rc.high)
            r_high_train = r_high + (config.terminal_weight * r_env if done else 0.0)
            next_hi = high_features(obs2, ecfg)
            if learner is not None:
                learner.on_high(hi_obs, hi_action, r_high_train, next_hi, done, steps_in)
            rec.ep_reward_high += r_high
            label = kind.value if kind.terminal else status.value
            tx, ty = subgoal.absolute_target
            rec.subgoals.append(SubgoalRow(sub_id, hi_action, subgoal.issued_at_step, steps_in,
                                           subgoal.bearing_offset, subgoal.distance, tx, ty, label,
                                           r_high, r_high_train, hi_obs, next_hi))
            prev_bearing = subgoal.bearing_offset

        if learner is not None:
            learner.on_timestep()
        if kind.terminal:
            rec.outcome = kind
            return rec
        obs = obs2


# --- training ----------------------------------------------------------------

LOG_HEADER = ["episode", "steps", "outcome", "ep_reward_low", "ep_reward_high", "loss_q", "loss_c1",
              "loss_c2", "loss_actor", "epsilon", "wall_ms"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def episode_seed(seed: int, episode: int, stream: int = 0) -> int:
    return int(np.random.SeedSequence([seed, stream, episode]).generate_state(1)[0])


@dataclass
class TrainConfig:
    mode: str = "hierarchy"  # or "td3" for the flat baseline
    update_every: int = 100
    flat_reward: str = "env"
    record_wall_time: bool = False

    def __post_init__(self):
        if self.mode not in ("hierarchy", "td3"):
            raise ValueError("mode must be 'hierarchy' or 'td3'")
        if self.flat_reward not in ("env", "low"):
            raise ValueError("flat_reward must be 'env' or 'low'")
        if self.update_every < 1:
            raise ValueError("update_every must be >= 1")


class Trainer:
    """Owns the agents, replay buffers, update cadence and episode schedule."""

    def __init__(self, worlds: list[World], env_config: EnvConfig | None = None,
                 hierarchy: HierarchyConfig | None = None, dqn: DqnConfig | None = None,
                 td3: Td3Config | None = None, rewards: RewardConfig | None = None,
                 train: TrainConfig | None = None, seed: int = 0, total_episodes: int | None = None):
        if not worlds:
            raise ValueError("at least one world is required")
        self.worlds = list(worlds)
        self.env_config = env_config or EnvConfig()
        self.hierarchy = hierarchy or HierarchyConfig()
        self.dqn_config = dqn or DqnConfig()
        self.td3_config = td3 or Td3Config()
        self.rewards = rewards or RewardConfig()
        self.train_config = train or TrainConfig()
        self.seed = seed
        self.total_episodes = total_episodes
        obs_dim = self.env_config.obs_dim
        s_td3, s_dqn, s_act, s_learn = np.random.SeedSequence(seed).generate_state(4)
        self.td3 = Td3Agent(obs_dim, self.td3_config, seed=int(s_td3))
        self.dqn = None
        if self.flat is False:
            self.dqn = DqnAgent(obs_dim, self.hierarchy.n_actions, self.dqn_config, seed=int(s_dqn))
        self.act_rng = np.random.default_rng(int(s_act))
        self.learn_rng = np.random.default_rng(int(s_learn))
        self.low_buffer = ReplayBuffer(self.td3_config.buffer_capacity, obs_dim, action_dim=2)
        self.high_buffer = None if self.flat else ReplayBuffer(self.dqn_config.buffer_capacity, obs_dim)
        self.envs = [NavEnv(w, self.env_config) for w in self.worlds]
        self.episodes_done = 0
        self.timesteps = 0
        self.low_learning_steps = 0
        self.cadence_fired_at: list[int] = []
        self.low_learns = self.high_learns = False
        self._losses = {"q": [], "c1": [], "c2": [], "actor": []}

    @property
    def flat(self) -> bool:
        return self.train_config.mode == "td3"

    # learner hooks used by run_episode
    def on_low(self, obs, u, reward, next_obs, done):
        if self.low_learns:
            self.low_buffer.add(obs, u, reward, next_obs, done)
            self.low_learning_steps += 1

    def on_high(self, obs, action, reward, next_obs, done, steps):
        if self.high_learns:
            self.high_buffer.add(obs, action, reward, next_obs, done, steps)

    def on_timestep(self):
        self.timesteps += 1
        if self.timesteps % self.train_config.update_every:
            return
        fired = False
        td3c, dqnc = self.td3_config, self.dqn_config
        if self.low_learns and len(self.low_buffer) >= td3c.batch_size:
            fired = True
            for _ in range(td3c.gradient_steps):
                batch = self.low_buffer.sample(td3c.batch_size, self.learn_rng)
                l1, l2, la = self.td3.train_step(batch, self.learn_rng)
                self._losses["c1"].append(l1)
                self._losses["c2"].append(l2)
                if la is not None:
                    self._losses["actor"].append(la)
        if self.high_learns and len(self.high_buffer) >= dqnc.batch_size:
            fired = True
            for _ in range(dqnc.gradient_steps):
                batch = self.high_buffer.sample(dqnc.batch_size, self.learn_rng)
                self._losses["q"].append(self.dqn.train_step(batch))
        if fired:
            self.cadence_fired_at.append(self.timesteps)

    # schedule
    def phase(self, episode: int) -> str:
        """Which levels act/learn in ``episode``: one of pretrain_low, train_high, joint,
        frozen_high, frozen_low, flat."""
        if self.flat:
            return "flat"
        mode = self.hierarchy.training_mode
        if mode != "alternating":
            return mode
        n = self.total_episodes or 1
        p1, p2, _ = self.hierarchy.phase_fractions
        if episode < round(p1 * n):
            return "pretrain_low"
        if episode < round((p1 + p2) * n):
            return "train_high"
        return "joint"

    def _dqn_progress(self, episode: int) -> float:
        n = self.total_episodes or 1
        if self.hierarchy.training_mode == "alternating":
            start = round(self.hierarchy.phase_fractions[0] * n)
            return (episode - start) / max(n - start, 1)
        return episode / n

    def _policies(self, phase: str):
        explore = UniformLowPolicy() if self.low_learning_steps < self.td3_config.warmup_steps else \
            Td3LowPolicy(self.td3, explore=True)
        greedy_low = Td3LowPolicy(self.td3, explore=False)
        n = self.hierarchy.n_actions
        table = {
            "flat": (None, explore, False, True),
            "pretrain_low": (RandomHighPolicy(n), explore, False, True),
            "train_high": (DqnHighPolicy(self.dqn, greedy=False), greedy_low, True, False),
            "joint": (DqnHighPolicy(self.dqn, greedy=False), explore, True, True),
            "frozen_high": (DqnHighPolicy(self.dqn, greedy=True), explore, False, True),
            "frozen_low": (DqnHighPolicy(self.dqn, greedy=False), greedy_low, True, False),
        }
        return table[phase]

    def run_training_episode(self) -> tuple[EpisodeRecord, dict]:
        ep = self.episodes_done
        phase = self.phase(ep)
        high, _, self.high_learns, self.low_learns = self._policies(phase)
        if self.dqn is not None and self.high_learns:
            self.dqn.set_progress(self._dqn_progress(ep))

        trainer = self

        class _SwitchingLow:
            # warmup ends mid-episode when the step budget is crossed
            def __call__(self, features, env, subgoal, rng):
                return trainer._policies(phase)[1](features, env, subgoal, rng)

        env = self.envs[ep % len(self.envs)]
        for k in self._losses:
            self._losses[k] = []
        t0 = time.perf_counter()
        rec = run_episode(env, high, _SwitchingLow(), self.hierarchy, self.act_rng,
                          episode_seed(self.seed, ep), ep, self.rewards, learner=self,
                          flat=self.flat, flat_reward=self.train_config.flat_reward)
        wall = (time.perf_counter() - t0) * 1000.0
        self.episodes_done += 1
        mean = lambda xs: float(np.mean(xs)) if xs else None  # noqa: E731
        row = {
            "episode": ep, "steps": rec.steps, "outcome": rec.outcome.value,
            "ep_reward_low": rec.ep_reward_low,
            "ep_reward_high": None if self.flat else rec.ep_reward_high,
            "loss_q": mean(self._losses["q"]), "loss_c1": mean(self._losses["c1"]),
            "loss_c2": mean(self._losses["c2"]), "loss_actor": mean(self._losses["actor"]),
            "epsilon": None if self.dqn is None else self.dqn.epsilon,
            "wall_ms": round(wall, 3) if self.train_config.record_wall_time else None,
        }
        return rec, row

    def train(self, episodes: int, log_path=None, checkpoint_dir=None, checkpoint_every: int = 0,
              progress=None) -> list[dict]:
        """Run ``episodes`` more training episodes; returns the log rows."""
        if episodes <= 0:
            raise ValueError("budget must be positive")
        if self.total_episodes is None:
            self.total_episodes = self.episodes_done + episodes
        rows = []
        fh = None
        if log_path is not None:
            log_path = Path(log_path)
            new = not log_path.exists() or log_path.stat().st_size == 0
            fh = open(log_path, "a", newline="")
            writer = csv.writer(fh, lineterminator="\n")
            if new:
                writer.writerow(LOG_HEADER)
        try:
            for _ in range(episodes):
                rec, row = self.run_training_episode()
                rows.append(row)
                if fh is not None:
                    writer.writerow([_fmt(row[k]) for k in LOG_HEADER])
                    fh.flush()
                if checkpoint_dir is not None and checkpoint_every and self.episodes_done % checkpoint_every == 0:
                    self.save(Path(checkpoint_dir) / f"ckpt_{self.episodes_done:06d}.bin")
                if progress is not None:
                    progress(rec, row)
        finally:
            if fh is not None:
                fh.close()
        return rows

    # persistence
    def meta(self) -> dict:
        return {
            "kind": "td3" if self.flat else "hierarchy",
            "env": asdict(self.env_config),
            "hierarchy": asdict(self.hierarchy),
            "train": asdict(self.train_config),
            "rewards": {"high": asdict(self.rewards.high), "low": asdict(self.rewards.low)},
            "seed": self.seed,
            "episodes_done": self.episodes_done,
            "total_episodes": self.total_episodes,
            "timesteps": self.timesteps,
            "low_learning_steps": self.low_learning_steps,
        }

    def save(self, path) -> None:
        entries, td3_meta = self.td3.state()
        meta = {**self.meta(), "td3": td3_meta}
        if self.dqn is not None:
            d_entries, d_meta = self.dqn.state()
            entries.update(d_entries)
            meta["dqn"] = d_meta
        save_checkpoint(path, entries, meta)

    def save_resume(self, directory) -> None:
        """Checkpoint plus replay buffers and RNG states, enough to continue bit-identically."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.save(directory / "checkpoint.bin")
        arrays = {}
        for name, buf in (("low", self.low_buffer), ("high", self.high_buffer)):
            if buf is None:
                continue
            for f in ("obs", "next_obs", "actions", "rewards", "dones", "steps"):
                arrays[f"{name}.{f}"] = getattr(buf, f)
            arrays[f"{name}.cursor_size"] = np.array([buf.cursor, buf.size])
        np.savez(directory / "replay.npz", **arrays)
        (directory / "rng.json").write_text(json.dumps({
            "act": self.act_rng.bit_generator.state, "learn": self.learn_rng.bit_generator.state,
            "cadence_fired_at": self.cadence_fired_at}))

    @classmethod
    def load_resume(cls, directory, worlds: list[World]) -> "Trainer":
        directory = Path(directory)
        trainer = cls.from_checkpoint(directory / "checkpoint.bin", worlds)
        data = np.load(directory / "replay.npz")
        for name, buf in (("low", trainer.low_buffer), ("high", trainer.high_buffer)):
            if buf is None:
                continue
            for f in ("obs", "next_obs", "actions", "rewards", "dones", "steps"):
                getattr(buf, f)[...] = data[f"{name}.{f}"]
            buf.cursor, buf.size = (int(v) for v in data[f"{name}.cursor_size"])
        states = json.loads((directory / "rng.json").read_text())
        trainer.act_rng.bit_generator.state = states["act"]
        trainer.learn_rng.bit_generator.state = states["learn"]
        trainer.cadence_fired_at = list(states["cadence_fired_at"])
        return trainer

    @classmethod
    def from_checkpoint(cls, path, worlds: list[World]) -> "Trainer":
        entries, meta = load_checkpoint(path)
        trainer = cls(worlds, **configs_from_meta(meta), seed=meta["seed"],
                      total_episodes=meta["total_episodes"])
        trainer.td3 = Td3Agent.from_state(entries, meta["td3"])
        if meta["kind"] == "hierarchy":
            trainer.dqn = DqnAgent.from_state(entries, meta["dqn"])
        trainer.episodes_done = meta["episodes_done"]
        trainer.timesteps = meta["timesteps"]
        trainer.low_learning_steps = meta["low_learning_steps"]
        return trainer


def configs_from_meta(meta: dict) -> dict:
    env = EnvConfig(**meta["env"])
    h = HierarchyConfig(**meta["hierarchy"])
    tcfg = TrainConfig(**meta["train"])
    rw = RewardConfig(R.HighRewardWeights(**meta["rewards"]["high"]), R.LowRewardWeights(**meta["rewards"]["low"]))
    td3 = dict(meta["td3"]["config"])
    td3["hidden"] = tuple(td3["hidden"])
    out = {"env_config": env, "hierarchy": h, "train": tcfg, "rewards": rw, "td3": Td3Config(**td3)}
    if "dqn" in meta:
        d = dict(meta["dqn"]["config"])
        d["hidden"] = tuple(d["hidden"])
        out["dqn"] = DqnConfig(**d)
    return out


def train(worlds: list[World], config: dict | None = None, budget: int = 100, seed: int = 0,
          log_path=None, checkpoint_dir=None, checkpoint_every: int = 0) -> Trainer:
    """Convenience wrapper: build a Trainer from config objects and run ``budget`` episodes."""
    config = config or {}
    trainer = Trainer(worlds, seed=seed, total_episodes=budget, **config)
    trainer.train(budget, log_path=log_path, checkpoint_dir=checkpoint_dir, checkpoint_every=checkpoint_every)
    if checkpoint_dir is not None:
        trainer.save(Path(checkpoint_dir) / "final.bin")
    return trainer
