import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hrnav import rewards as R
from hrnav.simworld import Outcome

from . import oracles

angles = st.floats(-180, 180)
dist = st.floats(0, 50)
pos = st.floats(1e-3, 50)


@pytest.mark.parametrize("theta,expected", [(0, 1.0), (180, 0.0), (-180, 0.0), (90, 0.5), (-45, 0.75)])
def test_direction_examples(theta, expected):
    assert R.direction_reward(theta) == expected


def test_direction_rejects_out_of_range():
    with pytest.raises(ValueError):
        R.direction_reward(181.0)
    with pytest.raises(ValueError):
        R.direction_reward(float("nan"))


@pytest.mark.parametrize("d_actual,d_target,expected", [(2.0, 2.0, 1.0), (4.0, 2.0, 0.0), (0.0, 2.0, 0.0),
                                                        (1.5, 2.0, 0.75), (9.0, 2.0, 0.0)])
def test_distance_examples(d_actual, d_target, expected):
    assert R.distance_reward(d_actual, d_target) == expected


@pytest.mark.parametrize("d_target", [0.0, -1.0])
def test_distance_rejects_bad_target(d_target):
    with pytest.raises(ValueError):
        R.distance_reward(1.0, d_target)


def test_avoidance_and_smoothness_examples():
    assert R.avoidance_reward(False) == 0.2
    assert R.avoidance_reward(True) == 0.0
    assert R.avoidance_reward(False, 0.0) == 0.0
    assert R.smoothness_reward(0) == 0.1
    assert R.smoothness_reward(90) == 0.0
    assert R.smoothness_reward(45) == pytest.approx(0.05, abs=1e-15)
    assert R.smoothness_reward(-300) == 0.0


def test_high_level_examples():
    ideal = R.HighRewardInputs(0.0, 2.0, 2.0, False, 0.0, False)
    assert R.high_level_reward(ideal) == pytest.approx(0.82, abs=1e-12)
    hit = R.HighRewardInputs(0.0, 2.0, 2.0, False, 0.0, True)
    assert R.high_level_reward(hit) == pytest.approx(-0.18, abs=1e-12)
    zero = R.HighRewardWeights(0, 0, 0, 0, 0.2, 1.0, 0.01)
    assert R.high_level_reward(ideal, zero) == -0.01


def test_weights_rejected_when_negative():
    with pytest.raises(ValueError):
        R.HighRewardWeights(w1=-0.1)
    with pytest.raises(ValueError):
        R.LowRewardWeights(w8=-1)


def test_default_weights_verbatim():
    w = R.HighRewardWeights()
    assert (w.w1, w.w2, w.w3, w.w4, w.r_avoidance, w.p_collision, w.p_time) == (0.4, 0.4, 0.1, 0.1, 0.2, 1.0, 0.01)
    lw = R.LowRewardWeights()
    assert (lw.w7, lw.w8) == (1.0, 1.0)


@pytest.mark.parametrize("x,expected", [(0.0, 1.0), (1.0, 0.0), (2.5, 0.0), (0.25, 0.75)])
def test_proximity_shaping(x, expected):
    assert R.proximity_shaping(x) == expected


def test_proximity_rejects_negative():
    with pytest.raises(ValueError):
        R.proximity_shaping(-0.1)


def test_env_reward_examples():
    assert R.env_reward(Outcome.GOAL_REACHED, 0.3, 0.2, 0.1) == 100.0
    assert R.env_reward(Outcome.COLLISION, 0.3, 0.2, 0.1) == -100.0
    assert R.env_reward(Outcome.RUNNING, 1.0, 0.0, 2.0) == 0.5
    assert R.env_reward(Outcome.RUNNING, 0.5, 1.0, 0.5) == -0.5
    assert R.env_reward(Outcome.TIMEOUT, 1.0, 0.0, 2.0) == 0.5


def test_low_level_examples():
    assert R.low_level_reward(0.5, 1.0, 1.0, False) == 2.5
    assert R.low_level_reward(0.5, 1.0, 1.0, True, R.LowRewardWeights(0, 0)) == 0.5
    assert R.low_level_reward(-100.0, 0.0, 0.0, True) == -101.0


def test_obstacle_ahead_cone():
    scan = np.full(20, 5.0)
    assert not R.obstacle_ahead(scan, math.pi)
    # beams 9 and 10 sit at -4.7 and +4.7 degrees, beams 8 and 11 at -14.2 and +14.2 degrees
    for i in (8, 9, 10, 11):
        s = scan.copy()
        s[i] = 0.5
        assert R.obstacle_ahead(s, math.pi)
    for i in (7, 12, 0, 19):
        s = scan.copy()
        s[i] = 0.5
        assert not R.obstacle_ahead(s, math.pi)


# --- properties --------------------------------------------------------------------

@given(angles, dist, pos, st.booleans(), st.floats(-720, 720), st.booleans())
def test_high_reward_matches_oracle_and_bound(theta, d_actual, d_target, ahead, delta, collided):
    got = R.high_level_reward(R.HighRewardInputs(theta, d_actual, d_target, ahead, delta, collided))
    assert abs(got - oracles.r_high(theta, d_actual, d_target, ahead, delta, collided)) <= 1e-12
    assert got <= 0.82 + 1e-15
    if collided:
        assert got <= -0.18 + 1e-15


@given(angles, dist, pos, st.floats(-720, 720))
def test_component_bounds(theta, d_actual, d_target, delta):
    assert 0.0 <= R.direction_reward(theta) <= 1.0
    assert 0.0 <= R.distance_reward(d_actual, d_target) <= 1.0
    assert 0.0 <= R.smoothness_reward(delta) <= 0.1
    assert R.avoidance_reward(bool(int(d_actual) % 2)) in (0.0, 0.2)


@given(st.floats(0, 1), st.floats(-1, 1), st.floats(0, 20))
def test_env_running_range_and_oracle(lin, ang, d_min):
    got = R.env_reward(Outcome.RUNNING, lin, ang, d_min)
    assert -1.0 <= got <= 0.5
    assert got == oracles.r_env("running", lin, ang, d_min)


@given(st.floats(-200, 200), st.floats(0, 1), st.floats(0, 1), st.booleans(), st.floats(0, 5), st.floats(0, 5))
def test_low_reward_matches_oracle(env_r, rd, rdist, collided, w7, w8):
    got = R.low_level_reward(env_r, rd, rdist, collided, R.LowRewardWeights(w7, w8))
    assert abs(got - oracles.r_low(env_r, rd, rdist, collided, w7, w8)) <= 1e-12


@given(st.floats(0, 180), st.floats(0, 180))
def test_direction_strictly_decreasing(a, b):
    if a < b:
        assert R.direction_reward(a) >= R.direction_reward(b)
    # strict once the gap survives rounding of 1 - x/180
    if b - a > 1e-12:
        assert R.direction_reward(a) > R.direction_reward(b)


@given(st.floats(0, 10), st.floats(0, 10))
def test_shaping_non_increasing(a, b):
    if a <= b:
        assert R.proximity_shaping(a) >= R.proximity_shaping(b)


@given(st.floats(-1e4, 1e4))
def test_normalize_degrees_range(a):
    n = R.normalize_degrees(a)
    assert -180.0 <= n <= 180.0
    assert math.isclose(math.cos(math.radians(n)), math.cos(math.radians(a)), abs_tol=1e-9)
