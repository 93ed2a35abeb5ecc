"""Time-parameterized quintic trajectories through waypoint lists.

Each segment is a quintic Hermite polynomial in normalized time with
prescribed boundary position, velocity and acceleration.  Interior knots
get Catmull-Rom style tangents scaled toward cruise speed (down to zero
through reversals) and zero acceleration, which makes the spline C2
across joints.  Segment durations start from a trapezoidal speed
profile along the chord and are dilated until the peak sampled speed
respects the cruise limit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .msgs import TrajectorySetpoint

SPEED_SLACK = 1.02  # dilation target, below the 1.05 interface bound
KNOT_SPEED_SCALE = 0.9  # interior tangents stay under cruise so dilation converges
RAMP_ACCEL_FRACTION = 0.5  # trapezoid ramp accel = this fraction of cruise speed per second
_MIN_SEGMENT_LENGTH = 1e-9


class TrajectoryError(ValueError):
    pass


class YawPolicy(enum.Enum):
    FACE_PATH = "FACE_PATH"
    FIXED = "FIXED"


@dataclass(frozen=True)
class TrajectorySpec:
    waypoints: np.ndarray  # (n, 3), n >= 2
    cruise_speed: float
    frame_id: str = "earth"
    yaw_policy: YawPolicy = YawPolicy.FIXED
    yaw_angle: float = 0.0  # used by FIXED

    def __post_init__(self):
        object.__setattr__(self, "waypoints", np.asarray(self.waypoints, dtype=float).reshape(-1, 3))

    def check(self) -> None:
        if len(self.waypoints) < 2:
            raise TrajectoryError("need at least two waypoints")
        if not self.cruise_speed > 0.0:
            raise TrajectoryError("cruise_speed must be positive")
        diffs = np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)
        if np.any(diffs <= _MIN_SEGMENT_LENGTH):
            raise TrajectoryError("consecutive waypoints must be distinct")


@dataclass(frozen=True)
class Segment:
    """One quintic piece: position coefficients over normalized time s in [0, 1]."""

    coeffs: np.ndarray  # (6, 3), p(s) = sum coeffs[k] s^k
    duration: float

    def sample(self, tau: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Position, velocity, acceleration at local time tau in [0, duration]."""
        s = min(max(tau / self.duration, 0.0), 1.0)
        c = self.coeffs
        p = c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))))
        dp = c[1] + s * (2 * c[2] + s * (3 * c[3] + s * (4 * c[4] + s * 5 * c[5])))
        ddp = 2 * c[2] + s * (6 * c[3] + s * (12 * c[4] + s * 20 * c[5]))
        return p, dp / self.duration, ddp / self.duration**2


def hermite_segment(
    p0: np.ndarray,
    v0: np.ndarray,
    a0: np.ndarray,
    p1: np.ndarray,
    v1: np.ndarray,
    a1: np.ndarray,
    duration: float,
) -> Segment:
    if not duration > 0.0:
        raise TrajectoryError("segment duration must be positive")
    T = duration
    d = p1 - p0
    V0, V1 = v0 * T, v1 * T
    A0, A1 = a0 * T * T, a1 * T * T
    c = np.empty((6, 3))
    c[0] = p0
    c[1] = V0
    c[2] = 0.5 * A0
    c[3] = 10.0 * d - 6.0 * V0 - 4.0 * V1 - 1.5 * A0 + 0.5 * A1
    c[4] = -15.0 * d + 8.0 * V0 + 7.0 * V1 + 1.5 * A0 - A1
    c[5] = 6.0 * d - 3.0 * V0 - 3.0 * V1 - 0.5 * A0 + 0.5 * A1
    return Segment(c, T)


@dataclass(frozen=True)
class Trajectory:
    """Piecewise quintic over relative time [0, duration]; immutable after planning."""

    segments: tuple[Segment, ...]
    knot_times: np.ndarray  # len(segments) + 1, starting at 0
    frame_id: str = "earth"
    yaw_policy: YawPolicy = YawPolicy.FIXED
    yaw_angle: float = 0.0

    @property
    def duration(self) -> float:
        return float(self.knot_times[-1])

    def sample_raw(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if t <= 0.0:
            p, _, _ = self.segments[0].sample(0.0)
            return p, np.zeros(3), np.zeros(3)
        if t >= self.duration:
            p, _, _ = self.segments[-1].sample(self.segments[-1].duration)
            return p, np.zeros(3), np.zeros(3)
        i = int(np.searchsorted(self.knot_times, t, side="right")) - 1
        i = min(max(i, 0), len(self.segments) - 1)
        return self.segments[i].sample(t - float(self.knot_times[i]))

    def yaw_at(self, t: float, velocity: np.ndarray, fallback: float) -> float:
        if self.yaw_policy is YawPolicy.FIXED:
            return self.yaw_angle
        if float(np.hypot(velocity[0], velocity[1])) > 1e-3:
            return math.atan2(velocity[1], velocity[0])
        # at rest: face along the nearest chord instead of spinning on noise
        i = min(int(np.searchsorted(self.knot_times, max(t, 0.0), side="right")) - 1, len(self.segments) - 1)
        i = max(i, 0)
        p0, _, _ = self.segments[i].sample(0.0)
        p1, _, _ = self.segments[i].sample(self.segments[i].duration)
        chord = p1 - p0
        if float(np.hypot(chord[0], chord[1])) > 1e-6:
            return math.atan2(chord[1], chord[0])
        return fallback

    def sample(self, t: float, fallback_yaw: float = 0.0) -> TrajectorySetpoint:
        p, v, a = self.sample_raw(t)
        return TrajectorySetpoint(position=p, velocity=v, acceleration=a, yaw=self.yaw_at(t, v, fallback_yaw))

    def max_speed(self, samples_per_segment: int = 128) -> float:
        peak = 0.0
        for seg in self.segments:
            peak = max(peak, _segment_peak_speed(seg, samples_per_segment))
        return peak


def _dedupe(points: np.ndarray) -> np.ndarray:
    keep = [points[0]]
    for p in points[1:]:
        if np.linalg.norm(p - keep[-1]) > _MIN_SEGMENT_LENGTH:
            keep.append(p)
    return np.asarray(keep)


def _knot_velocities(points: np.ndarray, cruise_speed: float) -> np.ndarray:
    """Catmull-Rom directions, scaled down through turns; rest at the ends."""
    n = len(points)
    vels = np.zeros((n, 3))
    for k in range(1, n - 1):
        din = points[k] - points[k - 1]
        dout = points[k + 1] - points[k]
        nin, nout = np.linalg.norm(din), np.linalg.norm(dout)
        tangent = points[k + 1] - points[k - 1]
        tn = np.linalg.norm(tangent)
        if tn < _MIN_SEGMENT_LENGTH or nin < _MIN_SEGMENT_LENGTH or nout < _MIN_SEGMENT_LENGTH:
            continue
        cos_turn = float(np.dot(din, dout) / (nin * nout))
        cos_turn = min(1.0, max(-1.0, cos_turn))
        # full speed straight through, full stop on a reversal
        scale = math.cos(math.acos(cos_turn) / 2.0)
        speed = KNOT_SPEED_SCALE * cruise_speed * max(0.0, scale)
        vels[k] = (tangent / tn) * speed
    return vels


def _trapezoid_duration(d: float, s0: float, s1: float, cruise: float, accel: float) -> float:
    """Time for a trapezoidal speed profile over chord length d with entry/exit speeds."""
    s0, s1 = min(s0, cruise), min(s1, cruise)
    d_ramps = ((cruise**2 - s0**2) + (cruise**2 - s1**2)) / (2.0 * accel)
    if d_ramps <= d:
        return (cruise - s0) / accel + (cruise - s1) / accel + (d - d_ramps) / cruise
    # short chord: triangular profile peaking below cruise
    v_peak = math.sqrt(max(accel * d + 0.5 * (s0**2 + s1**2), max(s0, s1) ** 2))
    return (v_peak - s0) / accel + (v_peak - s1) / accel + 1e-9


def plan_trajectory(
    waypoints: Sequence[Sequence[float]] | np.ndarray,
    cruise_speed: float,
    max_iterations: int = 30,
) -> Trajectory:
    """Quintic spline through the waypoints, at rest at both ends.

    Peak speed is kept within a few percent of ``cruise_speed`` by
    dilating segment durations.
    """
    if not cruise_speed > 0.0:
        raise TrajectoryError("cruise_speed must be positive")
    pts = _dedupe(np.asarray(waypoints, dtype=float).reshape(-1, 3))
    if len(pts) < 2:
        raise TrajectoryError("need at least two distinct waypoints")
    vels = _knot_velocities(pts, cruise_speed)
    accel = RAMP_ACCEL_FRACTION * cruise_speed
    zero = np.zeros(3)
    segments: list[Segment] = []
    for k in range(len(pts) - 1):
        p0, p1 = pts[k], pts[k + 1]
        v0, v1 = vels[k], vels[k + 1]
        d = float(np.linalg.norm(p1 - p0))
        T = _trapezoid_duration(d, float(np.linalg.norm(v0)), float(np.linalg.norm(v1)), cruise_speed, accel)
        seg = hermite_segment(p0, v0, zero, p1, v1, zero, T)
        for _ in range(max_iterations):
            peak = _segment_peak_speed(seg)
            if peak <= SPEED_SLACK * cruise_speed:
                break
            T *= (peak / (SPEED_SLACK * cruise_speed)) ** 0.7
            seg = hermite_segment(p0, v0, zero, p1, v1, zero, T)
        segments.append(seg)
    knots = np.concatenate([[0.0], np.cumsum([s.duration for s in segments])])
    return Trajectory(tuple(segments), knots)


def plan(spec: TrajectorySpec) -> Trajectory:
    """Plan from a full spec, carrying frame and yaw policy on the handle."""
    spec.check()
    base = plan_trajectory(spec.waypoints, spec.cruise_speed)
    return Trajectory(base.segments, base.knot_times, spec.frame_id, spec.yaw_policy, spec.yaw_angle)


def rest_to_rest(p0, p1, cruise_speed: float, frame_id: str = "earth") -> Trajectory:
    """Single straight chord, at rest at both ends."""
    t = plan_trajectory(np.array([p0, p1], dtype=float), cruise_speed)
    return Trajectory(t.segments, t.knot_times, frame_id)


def _segment_peak_speed(seg: Segment, samples: int = 64) -> float:
    peak = 0.0
    for tau in np.linspace(0.0, seg.duration, samples):
        _, v, _ = seg.sample(float(tau))
        peak = max(peak, float(np.linalg.norm(v)))
    return peak
