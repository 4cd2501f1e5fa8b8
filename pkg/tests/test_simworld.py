import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrnav.simworld import (Action, Circle, EnvConfig, EpisodeFinishedError, NavEnv, Outcome, Pose, Rect, World,
                            WorldFormatError, WorldValidationError, bundled_world, dump_world, load_world,
                            min_obstacle_distance, raycast_scan, wrap_angle)

from . import oracles


def world_doc(**over):
    doc = {"format_version": 1, "bounds": [0, 0, 10, 10], "start": [1, 1, 0], "goal": [9, 9], "obstacles": []}
    doc.update(over)
    return json.dumps(doc)


# --- loading -------------------------------------------------------------------

def test_load_empty_world():
    w = load_world(world_doc())
    assert w.obstacles == () and w.start_pose == (1.0, 1.0, 0.0) and w.goal == (9.0, 9.0)


def test_obstacle_on_start_rejected():
    with pytest.raises(WorldValidationError):
        load_world(world_doc(obstacles=[{"type": "circle", "params": [1, 1, 0.5]}]))


def test_goal_inside_inflated_obstacle_rejected():
    with pytest.raises(WorldValidationError):
        load_world(world_doc(obstacles=[{"type": "rect", "params": [9.1, 8, 9.9, 10]}]))


def test_bundled_corridor_has_two_rects():
    w = bundled_world("corridor")
    assert len(w.obstacles) == 2 and all(isinstance(o, Rect) for o in w.obstacles)


@pytest.mark.parametrize("text", [
    "{not json", "[]", world_doc(format_version=2), world_doc(extra=1),
    json.dumps({"format_version": 1, "bounds": [0, 0, 1, 1]}),
    world_doc(obstacles=[{"type": "triangle", "params": [0, 0, 1]}]),
    world_doc(obstacles=[{"type": "circle", "params": [5, 5]}]),
    world_doc(bounds=[0, 0, "x", 10]),
])
def test_malformed_documents(text):
    with pytest.raises(WorldFormatError):
        load_world(text)


def test_dump_roundtrip():
    w = bundled_world("clutter")
    assert load_world(dump_world(w)) == w


# --- reset / step ----------------------------------------------------------------

def test_reset_deterministic_and_geometric():
    env = NavEnv(bundled_world("empty"))
    a = env.reset(7).as_vector()
    b = env.reset(7).as_vector()
    assert np.array_equal(a, b)
    assert env.observe().goal_distance == pytest.approx(math.hypot(8, 8), abs=1e-12)


def test_randomized_reset_deterministic_per_seed():
    env = NavEnv(bundled_world("clutter"), EnvConfig(randomize_start=True, randomize_goal=True))
    a = env.reset(3).as_vector()
    pa = (env.pose, env.goal)
    b = env.reset(3).as_vector()
    assert np.array_equal(a, b) and pa == (env.pose, env.goal)
    env.reset(4)
    assert (env.pose, env.goal) != pa
    assert env.world.is_free(env.pose.x, env.pose.y) and env.world.is_free(*env.goal)


def test_corridor_scan_minimum_is_wall_distance():
    env = NavEnv(bundled_world("corridor"))
    obs = env.reset(1)
    # start (1, 5) heading +x: side beams look straight at the walls y=0 and y=10 (5 m),
    # oblique beams hit the rectangle corners at (2, 4) and (2, 6)
    expected = min(oracles.ray_distance(1, 5, a, env.world, 7.0)
                   for a in np.linspace(-math.pi / 2, math.pi / 2, 20))
    assert obs.scan.min() == pytest.approx(expected, abs=1e-12)


def test_zero_action_keeps_pose():
    env = NavEnv(bundled_world("empty"))
    env.reset(0)
    p = env.pose
    _, out = env.step(Action(0.0, 0.0))
    assert env.pose == p and out.kind is Outcome.RUNNING


def test_forward_step_kinematics():
    env = NavEnv(bundled_world("empty"))
    env.reset(0)
    env.step(Action(1.0, 0.0), dt=0.1)
    assert env.pose.x == pytest.approx(1.1, abs=1e-15) and env.pose.y == 1.0


def test_timeout_after_exactly_500_idle_steps():
    env = NavEnv(bundled_world("empty"))
    env.reset(0)
    for i in range(499):
        _, out = env.step(Action(0.0, 0.0))
        assert out.kind is Outcome.RUNNING
    _, out = env.step(Action(0.0, 0.0))
    assert out.kind is Outcome.TIMEOUT and out.steps_elapsed == 500


def test_stepping_finished_episode_raises():
    env = NavEnv(bundled_world("empty"), EnvConfig(max_steps=1))
    env.reset(0)
    env.step(Action(0.0, 0.0))
    with pytest.raises(EpisodeFinishedError):
        env.step(Action(0.0, 0.0))


def test_wall_collision_and_goal():
    # 0.28 -> 0.18 m from the wall, inside the 0.2 m robot radius
    w = bundled_world("empty").with_task((0.28, 5.0, math.pi), (9, 9))
    env = NavEnv(w)
    env.reset(0)
    _, out = env.step(Action(1.0, 0.0))
    assert out.kind is Outcome.COLLISION


def test_goal_reached():
    w = bundled_world("empty").with_task((8.65, 9.0, 0.0), (9, 9))
    env = NavEnv(w)
    env.reset(0)
    _, out = env.step(Action(1.0, 0.0))
    assert out.kind is Outcome.GOAL_REACHED


def test_action_clamped():
    a = Action(3.0, -7.0).clamped()
    assert (a.linear, a.angular) == (1.0, -1.0)
    assert Action(-1.0, 0.5).clamped() == Action(0.0, 0.5)


# --- sensing ---------------------------------------------------------------------

def test_wall_three_metres_ahead():
    w = bundled_world("empty")
    scan = raycast_scan(Pose(7.0, 5.0, 0.0), w, n_beams=3, fov=math.pi)
    assert scan[1] == pytest.approx(3.0, abs=1e-12)


def test_unbounded_direction_clips_to_max_range():
    w = World((0, 0, 100, 100), start_pose=(50, 50, 0), goal=(60, 60))
    assert raycast_scan(Pose(50, 50, 0), w, 5, math.pi, 7.0).tolist() == [7.0] * 5


def test_circle_dead_ahead():
    w = World((0, 0, 10, 10), (Circle(5, 5, 0.5),), (3, 5, 0), (1, 1))
    scan = raycast_scan(Pose(3, 5, 0), w, 3, math.pi, 7.0)
    assert scan[1] == pytest.approx(1.5, abs=1e-12)


def test_clearance_examples():
    w = World((0, 0, 100, 100), (Circle(50, 50, 1.0),), (47, 50, 0), (10, 10))
    assert min_obstacle_distance(Pose(47, 50, 0), w, subtract_radius=False) == pytest.approx(2.0, abs=1e-12)
    assert min_obstacle_distance(Pose(48.85, 50, 0), w) == 0.0
    e = bundled_world("empty")
    assert min_obstacle_distance(Pose(1.0, 3.0, 0), e, subtract_radius=False) == pytest.approx(1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.3, 9.7), st.floats(0.3, 9.7), st.floats(-math.pi, math.pi))
def test_scan_matches_segment_oracle(x, y, heading):
    w = bundled_world("clutter")
    if w.surface_distance(x, y) <= 1e-6:
        return
    scan = raycast_scan(Pose(x, y, heading), w, 20, math.pi, 7.0)
    angles = heading - math.pi / 2 + np.arange(20) * (math.pi / 19)
    ref = [oracles.ray_distance(x, y, a, w, 7.0) for a in angles]
    np.testing.assert_allclose(scan, ref, atol=1e-9)
    assert np.all(scan > 0) and np.all(scan <= 7.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.25, 9.75), st.floats(0.25, 9.75))
def test_clearance_matches_oracle(x, y):
    w = bundled_world("clutter")
    d = w.surface_distance(x, y)
    if d > 0:
        assert d == pytest.approx(oracles.surface_distance(x, y, w), abs=1e-9)


@pytest.mark.parametrize("pose", [Pose(3.0, 5.0, 0.0), Pose(5.0, 3.4, math.pi / 2), Pose(6.1, 6.1, -3 * math.pi / 4)])
def test_aligned_beam_at_contact_geometry(pose):
    # circle at (5, 5) r=0.5 in the arena; each pose faces the circle centre
    w = World((0, 0, 10, 10), (Circle(5, 5, 0.5),), (1, 1, 0), (9, 9))
    beam = raycast_scan(pose, w, 1, math.pi, 7.0)[0]
    assert beam <= min_obstacle_distance(pose, w) + w.robot_radius + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 9.5), st.floats(0.5, 9.5))
def test_beam_toward_nearest_obstacle_bounded_by_clearance(x, y):
    # a beam aimed at the nearest surface point reads no more than clearance + radius
    w = bundled_world("clutter")
    if w.surface_distance(x, y) <= w.robot_radius:
        return
    best, angle = math.inf, 0.0
    for a in np.linspace(-math.pi, math.pi, 3601):
        r = oracles.ray_distance(x, y, a, w, 50.0)
        if r < best:
            best, angle = r, a
    scan = raycast_scan(Pose(x, y, angle), w, 1, math.pi, 50.0)
    clearance = min_obstacle_distance(Pose(x, y, angle), w)
    assert scan[0] <= clearance + w.robot_radius + 1e-3  # angle grid resolution


# --- properties --------------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-5, 5)), min_size=1, max_size=60))
def test_heading_wrapped_after_every_step(actions):
    env = NavEnv(bundled_world("empty"))
    env.reset(0)
    for lin, ang in actions:
        _, out = env.step(Action(lin, ang))
        assert -math.pi < env.pose.heading <= math.pi
        if out.kind.terminal:
            break


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(-math.pi, math.pi))
def test_straight_displacement_is_linear_dt(v, heading):
    w = bundled_world("empty").with_task((5, 5, heading), (9, 9))
    env = NavEnv(w)
    env.reset(0)
    env.step(Action(v, 0.0))
    assert math.hypot(env.pose.x - 5, env.pose.y - 5) == pytest.approx(v * 0.1, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.tuples(st.floats(0, 1), st.floats(-1, 1)), min_size=1, max_size=40))
def test_trajectories_deterministic(seed, actions):
    def run():
        env = NavEnv(bundled_world("clutter"), EnvConfig(randomize_start=True, randomize_goal=True))
        env.reset(seed)
        out = []
        for a in actions:
            obs, o = env.step(Action(*a))
            out.append((env.pose, o.kind, obs.as_vector().tobytes()))
            if o.kind.terminal:
                break
        return out
    assert run() == run()


@pytest.mark.parametrize("a", [0.0, math.pi, -math.pi, 3 * math.pi, -3 * math.pi, 7.5, -7.5, 1e-17])
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-12)
