"""Spline planner checks: exact waypoint interpolation, derivative
consistency by central differences, and the cruise-speed cap.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aeroswarm.trajectory import (
    Trajectory,
    TrajectoryError,
    TrajectorySpec,
    YawPolicy,
    hermite_segment,
    plan,
    plan_trajectory,
    rest_to_rest,
)

SQUARE = np.array(
    [
        [0.0, 0.0, 2.0],
        [4.0, 0.0, 2.0],
        [4.0, 4.0, 2.0],
        [0.0, 4.0, 2.0],
        [0.0, 0.0, 2.0],
    ]
)


def random_waypoints(seed, n):
    rng = np.random.RandomState(seed)
    pts = [rng.uniform(-10, 10, size=3)]
    for _ in range(n - 1):
        step = rng.uniform(-5, 5, size=3)
        while np.linalg.norm(step) < 0.5:
            step = rng.uniform(-5, 5, size=3)
        pts.append(pts[-1] + step)
    return np.array(pts)


waypoint_sets = st.builds(random_waypoints, st.integers(0, 2**31 - 1), st.integers(2, 8))
cruise_speeds = st.floats(0.3, 8.0)


@given(waypoint_sets, cruise_speeds)
@settings(max_examples=60, deadline=None)
def test_passes_through_every_waypoint(pts, cruise):
    traj = plan_trajectory(pts, cruise)
    assert len(traj.knot_times) == len(pts)
    for t_knot, p_ref in zip(traj.knot_times, pts):
        p, _, _ = traj.sample_raw(float(t_knot))
        assert np.linalg.norm(p - p_ref) < 1e-9


@given(waypoint_sets, cruise_speeds)
@settings(max_examples=40, deadline=None)
def test_rest_at_both_ends(pts, cruise):
    traj = plan_trajectory(pts, cruise)
    for t in (0.0, traj.duration):
        _, v, a = traj.sample_raw(t)
        assert np.linalg.norm(v) < 1e-9
        assert np.linalg.norm(a) < 1e-9


@given(waypoint_sets, cruise_speeds)
@settings(max_examples=30, deadline=None)
def test_derivatives_match_finite_differences(pts, cruise):
    """Central differences of sampled positions within 1e-3 of reported v, a."""
    traj = plan_trajectory(pts, cruise)
    h = 1e-5
    for u in np.linspace(0.02, 0.98, 17):
        t = float(u * traj.duration)
        if t < 2 * h or t > traj.duration - 2 * h:
            continue
        if min(abs(t - float(k)) for k in traj.knot_times) < h:
            continue  # stencil straddles a knot: acceleration may jump
        pm, _, _ = traj.sample_raw(t - h)
        p0, v0, a0 = traj.sample_raw(t)
        pp, _, _ = traj.sample_raw(t + h)
        v_fd = (pp - pm) / (2 * h)
        a_fd = (pp - 2 * p0 + pm) / (h * h)
        assert np.linalg.norm(v_fd - v0) < 1e-3
        assert np.linalg.norm(a_fd - a0) < 1e-3


@given(waypoint_sets, cruise_speeds)
@settings(max_examples=40, deadline=None)
def test_speed_never_exceeds_cruise_by_five_percent(pts, cruise):
    traj = plan_trajectory(pts, cruise)
    assert traj.max_speed(256) <= 1.05 * cruise + 1e-9


def test_collinear_chain_progresses_monotonically():
    pts = np.array([[0, 0, 1.0], [2, 0, 1.0], [5, 0, 1.0], [9, 0, 1.0]])
    traj = plan_trajectory(pts, 2.0)
    xs = [traj.sample_raw(t)[0][0] for t in np.linspace(0, traj.duration, 400)]
    assert all(b - a > -1e-9 for a, b in zip(xs, xs[1:]))
    ys = [abs(traj.sample_raw(t)[0][1]) for t in np.linspace(0, traj.duration, 400)]
    assert max(ys) < 1e-9


def test_samples_clamp_outside_time_range():
    traj = rest_to_rest([0, 0, 0], [1, 0, 0], 1.0)
    p_before, v_before, _ = traj.sample_raw(-5.0)
    p_after, v_after, _ = traj.sample_raw(traj.duration + 5.0)
    assert np.allclose(p_before, [0, 0, 0], atol=1e-12)
    assert np.allclose(p_after, [1, 0, 0], atol=1e-12)
    assert np.allclose(v_before, 0.0) and np.allclose(v_after, 0.0)


def test_duplicate_waypoints_are_merged():
    pts = np.array([[0, 0, 1.0], [0, 0, 1.0], [3, 0, 1.0], [3, 0, 1.0], [3, 3, 1.0]])
    traj = plan_trajectory(pts, 1.5)
    assert len(traj.segments) == 2


def test_rejects_degenerate_input():
    with pytest.raises(TrajectoryError):
        plan_trajectory(np.array([[0, 0, 0], [0, 0, 0]]), 1.0)
    with pytest.raises(TrajectoryError):
        plan_trajectory(np.array([[0, 0, 0], [1, 0, 0]]), 0.0)
    with pytest.raises(TrajectoryError):
        hermite_segment(np.zeros(3), np.zeros(3), np.zeros(3), np.ones(3), np.zeros(3), np.zeros(3), 0.0)


def test_duration_scales_inversely_with_speed():
    slow = plan_trajectory(SQUARE, 1.0)
    fast = plan_trajectory(SQUARE, 2.0)
    assert slow.duration > fast.duration
    # cruising dominates the long chords, so roughly a factor two
    assert slow.duration / fast.duration == pytest.approx(2.0, rel=0.35)


def test_square_corners_slow_down():
    """Knot speed at a right angle is below cruise (curvature slowdown)."""
    traj = plan_trajectory(SQUARE, 2.0)
    for t_knot in traj.knot_times[1:-1]:
        _, v, _ = traj.sample_raw(float(t_knot))
        assert np.linalg.norm(v) < 2.0 * 0.95


def test_yaw_policies():
    spec = TrajectorySpec(
        waypoints=np.array([[0, 0, 1.0], [5, 0, 1.0]]),
        cruise_speed=1.0,
        yaw_policy=YawPolicy.FACE_PATH,
    )
    traj = plan(spec)
    sp = traj.sample(traj.duration / 2)
    assert sp.yaw == pytest.approx(0.0, abs=1e-6)  # flying along +x

    fixed = plan(
        TrajectorySpec(
            waypoints=np.array([[0, 0, 1.0], [5, 0, 1.0]]),
            cruise_speed=1.0,
            yaw_policy=YawPolicy.FIXED,
            yaw_angle=1.1,
        )
    )
    assert fixed.sample(0.3).yaw == pytest.approx(1.1)


def test_path_facing_yaw_at_rest_faces_first_chord():
    spec = TrajectorySpec(
        waypoints=np.array([[0, 0, 1.0], [0, 5, 1.0]]),
        cruise_speed=1.0,
        yaw_policy=YawPolicy.FACE_PATH,
    )
    traj = plan(spec)
    assert traj.sample(0.0).yaw == pytest.approx(np.pi / 2, abs=1e-6)


def test_trajectory_is_immutable_handle():
    traj = rest_to_rest([0, 0, 0], [1, 1, 1], 1.0)
    assert isinstance(traj, Trajectory)
    with pytest.raises(Exception):
        traj.frame_id = "other"
