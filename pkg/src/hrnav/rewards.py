"""Two-level reward functions.

Every term is a pure function so composites can be checked against their
components. Angles enter in degrees; the simulator works in radians and the
conversion happens at this boundary (see ``degrees_between``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .simworld import Outcome


@dataclass(frozen=True)
class HighRewardWeights:
    w1: float = 0.4
    w2: float = 0.4
    w3: float = 0.1
    w4: float = 0.1
    r_avoidance: float = 0.2
    p_collision: float = 1.0
    p_time: float = 0.01

    def __post_init__(self):
        for k, v in vars(self).items():
            if v < 0:
                raise ValueError(f"{k} must be >= 0, got {v}")


@dataclass(frozen=True)
class LowRewardWeights:
    w7: float = 1.0
    w8: float = 1.0
    p_collision: float = 1.0

    def __post_init__(self):
        for k, v in vars(self).items():
            if v < 0:
                raise ValueError(f"{k} must be >= 0, got {v}")


@dataclass(frozen=True)
class HighRewardInputs:
    theta_diff: float
    d_actual: float
    d_target: float
    obstacle_ahead: bool
    delta_theta: float
    collided: bool


def normalize_degrees(a: float) -> float:
    """Map an angle in degrees into [-180, 180]."""
    a = math.fmod(a, 360.0)
    if a > 180.0:
        a -= 360.0
    elif a < -180.0:
        a += 360.0
    return a


def degrees_between(actual_rad: float, target_rad: float) -> float:
    return normalize_degrees(math.degrees(actual_rad - target_rad))


def direction_reward(theta_diff: float) -> float:
    if not abs(theta_diff) <= 180.0:
        raise ValueError(f"theta_diff must be within [-180, 180] degrees, got {theta_diff}")
    return 1.0 - abs(theta_diff) / 180.0


def distance_reward(d_actual: float, d_target: float) -> float:
    if not d_target > 0.0:
        raise ValueError(f"d_target must be positive, got {d_target}")
    if d_actual < 0.0:
        raise ValueError(f"d_actual must be >= 0, got {d_actual}")
    return 1.0 - min(abs(d_actual - d_target) / d_target, 1.0)


def avoidance_reward(obstacle_ahead: bool, r_avoidance: float = 0.2) -> float:
    return 0.0 if obstacle_ahead else r_avoidance


def smoothness_reward(delta_theta: float) -> float:
    return 0.1 * (1.0 - min(abs(delta_theta) / 90.0, 1.0))


def collision_penalty(collided: bool, p_collision: float = 1.0) -> float:
    return p_collision if collided else 0.0


def high_level_reward(inputs: HighRewardInputs, weights: HighRewardWeights = HighRewardWeights()) -> float:
    w = weights
    return (w.w1 * direction_reward(inputs.theta_diff)
            + w.w2 * distance_reward(inputs.d_actual, inputs.d_target)
            + w.w3 * avoidance_reward(inputs.obstacle_ahead, w.r_avoidance)
            + w.w4 * smoothness_reward(inputs.delta_theta)
            - collision_penalty(inputs.collided, w.p_collision)
            - w.p_time)


def proximity_shaping(x: float) -> float:
    if x < 0.0:
        raise ValueError(f"distance must be >= 0, got {x}")
    return 1.0 - x if x < 1.0 else 0.0


def env_reward(outcome: Outcome, a_lin: float, a_ang: float, d_min: float) -> float:
    if outcome is Outcome.GOAL_REACHED:
        return 100.0
    if outcome is Outcome.COLLISION:
        return -100.0
    return a_lin / 2.0 - abs(a_ang) / 2.0 - proximity_shaping(d_min) / 2.0


def low_level_reward(env_r: float, r_dir: float, r_dist: float, collided: bool,
                     weights: LowRewardWeights = LowRewardWeights()) -> float:
    return env_r + weights.w7 * (r_dir + r_dist) - weights.w8 * collision_penalty(collided, weights.p_collision)


def obstacle_ahead(scan: np.ndarray, fov: float, threshold: float = 1.0,
                   cone_deg: float = 15.0) -> bool:
    """Any beam within +-cone_deg of the heading reading below ``threshold`` metres."""
    n = len(scan)
    if n == 1:
        return bool(scan[0] < threshold)
    offsets = np.degrees(-fov / 2.0 + np.arange(n) * (fov / (n - 1)))
    ahead = np.abs(offsets) <= cone_deg + 1e-9
    return bool(np.any(np.asarray(scan)[ahead] < threshold))
