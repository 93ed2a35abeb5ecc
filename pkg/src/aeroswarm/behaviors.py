"""Skill layer: behavior servers with a uniform lifecycle and a
monitor/executor split.

Every behavior (takeoff, land, hover, go_to, follow_path,
follow_trajectory) is driven through the same five services
(start/pause/resume/stop/modify) plus an action channel carrying the
goal, periodic feedback, and exactly one terminal result.  Each tick the
monitor runs first (estimate freshness, platform health, timeout, goal
predicate) and may veto the executor, which otherwise streams motion
references toward the controller.

Behaviors that move the vehicle form an exclusion group: activating one
while another is non-idle is rejected, with a single carve-out where
`land` preempts a running `hover`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import quat, trajectory
from .geodesy import GeoOrigin, geo_to_enu
from .bus import (
    NS_PER_SEC,
    ActionBusy,
    ActionRejected,
    GoalHandle,
    MessageBus,
    ServerGoal,
)
from .msgs import (
    BehaviorResult,
    BehaviorState,
    BehaviorStatus,
    ControlKind,
    ControlMode,
    FlightStatus,
    FrameKind,
    GeoPoint,
    KinematicState,
    MotionReference,
    PlatformInfo,
    YawKind,
    position_reference,
    speed_reference,
    trajectory_reference,
)
from .tf import TfError, TfTree
from .trajectory import Trajectory, TrajectoryError, TrajectorySpec, YawPolicy

STALE_ESTIMATE_NS = 200_000_000  # monitor aborts beyond this estimate age
TIMEOUT_FACTOR = 3.0  # abort after this multiple of the nominal duration
CAPTURE_RADIUS = 0.15  # m; advance to the next path waypoint inside this
SETTLE_POSITION = 0.05  # m; terminal position tolerance
SETTLE_SPEED = 0.05  # m/s; terminal speed tolerance
FEEDBACK_RATE_HZ = 10.0
LAND_SETTLE_NS = 1 * NS_PER_SEC  # touchdown must hold this long before disarm

BEHAVIOR_NAMES = ("takeoff", "land", "hover", "go_to", "follow_path", "follow_trajectory")


class LifecycleError(RuntimeError):
    pass


# the complete transition table; every (event, state) pair absent here is rejected
TRANSITIONS: dict[tuple[str, BehaviorState], BehaviorState] = {
    ("start", BehaviorState.IDLE): BehaviorState.RUNNING,
    ("pause", BehaviorState.RUNNING): BehaviorState.PAUSED,
    ("resume", BehaviorState.PAUSED): BehaviorState.RUNNING,
    ("stop", BehaviorState.RUNNING): BehaviorState.IDLE,
    ("stop", BehaviorState.PAUSED): BehaviorState.IDLE,
    ("finish", BehaviorState.RUNNING): BehaviorState.IDLE,
    ("modify", BehaviorState.RUNNING): BehaviorState.RUNNING,
    ("modify", BehaviorState.PAUSED): BehaviorState.PAUSED,
}

EVENTS = tuple(sorted({e for e, _ in TRANSITIONS}))


@dataclass
class BehaviorLifecycle:
    """Pure lifecycle state machine with a replayable transition log."""

    state: BehaviorState = BehaviorState.IDLE
    log: list[tuple[str, BehaviorState, BehaviorState, int]] = field(default_factory=list)

    def can(self, event: str) -> bool:
        return (event, self.state) in TRANSITIONS

    def handle(self, event: str, t_ns: int = 0) -> BehaviorState:
        key = (event, self.state)
        if key not in TRANSITIONS:
            raise LifecycleError(f"event '{event}' rejected in state {self.state.value}")
        new = TRANSITIONS[key]
        self.log.append((event, self.state, new, t_ns))
        self.state = new
        return new


def _num(v) -> Optional[float]:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        return None
    f = float(v)
    return f if math.isfinite(f) else None


def _positive(v) -> Optional[float]:
    f = _num(v)
    return f if f is not None and f > 0.0 else None


def _point3(v) -> Optional[np.ndarray]:
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        return None
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        return None
    return a


class BehaviorSet:
    """All behavior servers of one drone plus their shared bus handles."""

    def __init__(
        self,
        bus: MessageBus,
        ns: str,
        tf_tree: Optional[TfTree] = None,
        rate_hz: float = 100.0,
        origin: Optional[GeoOrigin] = None,
    ):
        self.bus = bus
        self.ns = ns
        self.tf = tf_tree
        self.rate_hz = rate_hz
        self.origin = origin
        bus.create_topic(f"{ns}/motion_reference", MotionReference, latched=True)
        bus.create_topic(f"{ns}/self_localization/pose", KinematicState, latched=True)
        bus.create_topic(f"{ns}/platform/info", PlatformInfo, latched=True)
        self._active: Optional[BehaviorServer] = None
        self.servers: dict[str, BehaviorServer] = {}
        for cls in (Takeoff, Land, Hover, GoTo, FollowPath, FollowTrajectory):
            server = cls(self)
            self.servers[server.name] = server

    def estimate(self) -> Optional[KinematicState]:
        return self.bus.latched_value(f"{self.ns}/self_localization/pose")

    def platform(self) -> Optional[PlatformInfo]:
        return self.bus.latched_value(f"{self.ns}/platform/info")

    def publish_reference(self, ref: MotionReference) -> None:
        self.bus.publish(f"{self.ns}/motion_reference", ref)

    def earth_pose(self, p, frame_id: str) -> tuple[np.ndarray, float]:
        """A point and the yaw offset of its frame, re-expressed in 'earth'."""
        p = np.asarray(p, dtype=float)
        if frame_id in ("", "earth"):
            return p, 0.0
        if frame_id == "wgs84":
            if self.origin is None:
                raise ValueError("geodetic waypoint but no origin configured")
            return geo_to_enu(GeoPoint(float(p[0]), float(p[1]), float(p[2])), self.origin), 0.0
        if self.tf is None:
            raise ValueError(f"unknown frame '{frame_id}': no transform tree attached")
        xf = self.tf.lookup("earth", frame_id, None)
        return xf.apply(p), quat.yaw_of(xf.rotation)

    def active_other(self, me: "BehaviorServer") -> Optional["BehaviorServer"]:
        if self._active is not None and self._active is not me:
            return self._active
        return None

    def claim(self, server: "BehaviorServer") -> None:
        self._active = server

    def release(self, server: "BehaviorServer") -> None:
        if self._active is server:
            self._active = None


class BehaviorServer:
    """One behavior's server: five control services, an action channel,
    a latched status topic, and a periodic monitor/executor tick."""

    name = "base"

    def __init__(self, reg: BehaviorSet):
        self.reg = reg
        self.bus = reg.bus
        self.ns = reg.ns
        self.lifecycle = BehaviorLifecycle()
        self.goal: Optional[ServerGoal] = None
        self._pending_args: Optional[dict] = None
        self._last_result = BehaviorResult.NONE
        self._last_feedback: dict = {}
        self._hold: Optional[tuple[np.ndarray, float]] = None
        self._active_ns = 0
        self._nominal_ns = 0
        self._ticks = 0
        self._period_ns = int(round(NS_PER_SEC / reg.rate_hz))
        self._period_s = 1.0 / reg.rate_hz
        self._feedback_divisor = max(1, round(reg.rate_hz / FEEDBACK_RATE_HZ))
        self.channel_name = f"{self.ns}/behavior/{self.name}"
        self.bus.create_topic(f"{self.channel_name}/status", BehaviorStatus, latched=True)
        self.bus.set_action_server(self.channel_name, self._on_goal, self._on_cancel)
        self.bus.register_service(f"{self.channel_name}/start", self._srv_start)
        self.bus.register_service(f"{self.channel_name}/pause", self._srv_pause)
        self.bus.register_service(f"{self.channel_name}/resume", self._srv_resume)
        self.bus.register_service(f"{self.channel_name}/stop", self._srv_stop)
        self.bus.register_service(f"{self.channel_name}/modify", self._srv_modify)
        self.bus.add_component(self.channel_name, self._tick, reg.rate_hz)
        self._publish_status()

    # -- per-behavior hooks ------------------------------------------------

    def required_mode(self) -> Optional[ControlMode]:
        return None

    def _validate(self, args: dict, partial: bool = False) -> Optional[str]:
        return None

    def _activate(self, args: dict, est: KinematicState) -> None:
        raise NotImplementedError

    def _apply_modify(self, args: dict) -> None:
        pass

    def _goal_reached(self, est: KinematicState, now: int) -> bool:
        return False

    def _stop_counts_as_success(self, est: KinematicState, now: int) -> bool:
        return self._goal_reached(est, now)

    def _reference(self, est: KinematicState, now: int) -> Optional[MotionReference]:
        return None

    def _feedback(self, est: KinematicState, now: int) -> dict:
        return {}

    # -- goal intake ---------------------------------------------------------

    def _on_goal(self, goal: Any, handle: GoalHandle) -> tuple[bool, str]:
        args = dict(goal) if isinstance(goal, dict) else {}
        err = self._validate(args)
        if err:
            return False, err
        info = self.reg.platform()
        if info is None:
            return False, "platform info unavailable"
        if not (info.armed and info.offboard):
            return False, "platform must be armed and offboard"
        if info.flight_status is FlightStatus.EMERGENCY:
            return False, "platform in EMERGENCY"
        est = self.reg.estimate()
        if est is None:
            return False, "no state estimate"
        mode = self.required_mode()
        check = f"{self.ns}/controller/check_mode"
        if mode is not None and self.bus.has_service(check):
            reply = self.bus.call(check, {"mode": mode.to_json()})
            if not reply.get("feasible", False):
                return False, f"reference mode infeasible: {reply.get('reason', '')}"
        blocker = self.reg.active_other(self)
        if blocker is not None:
            if self.name == "land" and blocker.name == "hover":
                blocker.force_stop("preempted by land")
            else:
                return False, f"motion behavior '{blocker.name}' is active"
        try:
            self._activate(args, est)
        except (ValueError, TrajectoryError, TfError) as e:
            return False, str(e)
        self.goal = ServerGoal(self.bus.action_channel(self.channel_name), handle)
        self._pending_args = None
        self._hold = None
        self._active_ns = 0
        self._ticks = 0
        self._last_feedback = {}
        self.lifecycle.handle("start", self.bus.now)
        self.reg.claim(self)
        self._publish_status()
        return True, ""

    def _on_cancel(self, handle: GoalHandle, reason: str) -> None:
        if self.lifecycle.can("stop"):
            self._conclude("stop", reason or "canceled")

    # -- lifecycle services ----------------------------------------------------

    def _srv_start(self, request) -> dict:
        args = request if isinstance(request, dict) else {}
        try:
            self.bus.send_goal(self.channel_name, args)
        except (ActionRejected, ActionBusy) as e:
            return {"accepted": False, "reason": str(e)}
        return {"accepted": True, "reason": ""}

    def _srv_pause(self, request) -> dict:
        if not self.lifecycle.can("pause"):
            return {"accepted": False, "reason": f"pause rejected in state {self.lifecycle.state.value}"}
        est = self.reg.estimate()
        if est is not None:
            self._hold = (est.position.copy(), quat.yaw_of(est.orientation))
            self.reg.publish_reference(
                position_reference(self._hold[0], "earth", self._hold[1], t=self.bus.now)
            )
        self.lifecycle.handle("pause", self.bus.now)
        self._publish_status()
        return {"accepted": True, "reason": ""}

    def _srv_resume(self, request) -> dict:
        if not self.lifecycle.can("resume"):
            return {"accepted": False, "reason": f"resume rejected in state {self.lifecycle.state.value}"}
        self._hold = None
        self.lifecycle.handle("resume", self.bus.now)
        self._publish_status()
        return {"accepted": True, "reason": ""}

    def _srv_stop(self, request) -> dict:
        if not self.lifecycle.can("stop"):
            return {"accepted": False, "reason": f"stop rejected in state {self.lifecycle.state.value}"}
        self._conclude("stop")
        return {"accepted": True, "reason": ""}

    def _srv_modify(self, request) -> dict:
        if not self.lifecycle.can("modify"):
            return {"accepted": False, "reason": f"modify rejected in state {self.lifecycle.state.value}"}
        args = request if isinstance(request, dict) else {}
        err = self._validate(args, partial=True)
        if err:
            return {"accepted": False, "reason": err}
        try:
            normalized = self._normalize_modify(args)
        except (ValueError, TfError) as e:
            return {"accepted": False, "reason": str(e)}
        self._pending_args = normalized
        self.lifecycle.handle("modify", self.bus.now)
        return {"accepted": True, "reason": ""}

    def _normalize_modify(self, args: dict) -> dict:
        """Resolve frames and coerce numbers so application cannot fail later."""
        return dict(args)

    def force_stop(self, reason: str) -> None:
        if self.lifecycle.can("stop"):
            self._conclude("stop", reason)

    # -- tick ------------------------------------------------------------------

    def _tick(self, now: int) -> None:
        st = self.lifecycle.state
        if st is BehaviorState.IDLE:
            return
        if self._pending_args is not None:
            args, self._pending_args = self._pending_args, None
            self._apply_modify(args)
        if st is BehaviorState.PAUSED:
            if self._hold is not None:
                p, yaw = self._hold
                self.reg.publish_reference(position_reference(p, "earth", yaw, t=now))
            return
        est = self.reg.estimate()
        decision = self._monitor(est, now)
        if decision is not None:
            kind, why = decision
            self._conclude(kind, why)
            return
        self._active_ns += self._period_ns
        ref = self._reference(est, now)
        if ref is not None:
            self.reg.publish_reference(ref)
        if self._ticks % self._feedback_divisor == 0:
            fb = {"elapsed_s": self._active_ns / NS_PER_SEC}
            fb.update(self._feedback(est, now))
            self._last_feedback = fb
            if self.goal is not None and self.goal.active:
                self.goal.publish_feedback(fb)
            self._publish_status()
        self._ticks += 1

    def _monitor(self, est: Optional[KinematicState], now: int) -> Optional[tuple[str, str]]:
        if est is None or now - est.t > STALE_ESTIMATE_NS:
            return ("abort", "stale estimate")
        info = self.reg.platform()
        if info is None or info.flight_status is FlightStatus.EMERGENCY:
            return ("abort", "platform emergency")
        if self._nominal_ns > 0 and self._active_ns > TIMEOUT_FACTOR * self._nominal_ns:
            return ("abort", "timeout")
        if self._goal_reached(est, now):
            return ("succeed", "")
        return None

    # -- conclusion --------------------------------------------------------------

    def _conclude(self, cause: str, reason: str = "") -> None:
        """Terminate the active goal: cause is 'stop', 'succeed', or 'abort'."""
        now = self.bus.now
        est = self.reg.estimate()
        if cause == "stop":
            ok = est is not None and self._stop_counts_as_success(est, now)
            reason = reason or "stopped"
        elif cause == "succeed":
            ok = True
        else:
            ok = False
        if cause != "succeed" and est is not None:
            # pin the vehicle where it is; the latched reference must not
            # keep commanding stale motion
            self.reg.publish_reference(
                position_reference(est.position.copy(), "earth", quat.yaw_of(est.orientation), t=now)
            )
        self.lifecycle.handle("stop" if cause == "stop" else "finish", now)
        self._last_result = BehaviorResult.SUCCESS if ok else BehaviorResult.FAILURE
        if not ok and reason:
            self._last_feedback = {**self._last_feedback, "result_reason": reason}
        if self.goal is not None and self.goal.active:
            if ok:
                self.goal.succeed(dict(self._last_feedback))
            else:
                self.goal.abort(reason, dict(self._last_feedback))
        self.goal = None
        self._hold = None
        self.reg.release(self)
        self._publish_status()

    def _publish_status(self) -> None:
        self.bus.publish(
            f"{self.channel_name}/status",
            BehaviorStatus(self.lifecycle.state, self._last_result, dict(self._last_feedback)),
        )


# -- concrete behaviors ------------------------------------------------------


class Takeoff(BehaviorServer):
    """Vertical ascent to an absolute height at a given speed."""

    name = "takeoff"

    def required_mode(self) -> ControlMode:
        return ControlMode(ControlKind.TRAJECTORY, YawKind.YAW_ANGLE, FrameKind.LOCAL_ENU)

    def _validate(self, args: dict, partial: bool = False) -> Optional[str]:
        for key in ("height", "speed"):
            if partial and key not in args:
                continue
            if _positive(args.get(key)) is None:
                return f"{key} must be a positive number"
        return None

    def _activate(self, args: dict, est: KinematicState) -> None:
        self._height = float(args["height"])
        self._speed = float(args["speed"])
        self._yaw = quat.yaw_of(est.orientation)
        self._plan_from(est.position)

    def _plan_from(self, p0: np.ndarray) -> None:
        target = np.array([p0[0], p0[1], self._height])
        self._target = target
        self._t = 0.0
        if np.linalg.norm(target - p0) < SETTLE_POSITION:
            self._traj: Optional[Trajectory] = None
            self._nominal_ns = NS_PER_SEC
        else:
            spec = TrajectorySpec(
                np.array([p0, target]), self._speed, "earth", YawPolicy.FIXED, self._yaw
            )
            self._traj = trajectory.plan(spec)
            self._nominal_ns = int((self._traj.duration + 1.0) * NS_PER_SEC)
        self._dirty = False

    def _normalize_modify(self, args: dict) -> dict:
        out = {}
        if "height" in args:
            out["height"] = float(args["height"])
        if "speed" in args:
            out["speed"] = float(args["speed"])
        return out

    def _apply_modify(self, args: dict) -> None:
        self._height = args.get("height", self._height)
        self._speed = args.get("speed", self._speed)
        self._dirty = True

    def _goal_reached(self, est: KinematicState, now: int) -> bool:
        if self._traj is not None and self._t < self._traj.duration:
            return False
        return (
            abs(est.position[2] - self._height) < SETTLE_POSITION
            and float(np.linalg.norm(est.velocity)) < SETTLE_SPEED
        )

    def _reference(self, est: KinematicState, now: int) -> MotionReference:
        if self._dirty:
            self._plan_from(est.position.copy())
            self._active_ns = 0
        if self._traj is None:
            return position_reference(self._target, "earth", self._yaw, t=now)
        sp = self._traj.sample(self._t, fallback_yaw=self._yaw)
        self._t += self._period_s
        return trajectory_reference(sp, "earth", t=now)

    def _feedback(self, est: KinematicState, now: int) -> dict:
        progress = 1.0 if self._traj is None else min(1.0, self._t / self._traj.duration)
        return {
            "altitude": float(est.position[2]),
            "target_height": self._height,
            "progress": progress,
        }


class Land(BehaviorServer):
    """Constant-rate descent; disarms once touchdown has held for a second."""

    name = "land"

    def required_mode(self) -> ControlMode:
        return ControlMode(ControlKind.SPEED, YawKind.YAW_NONE, FrameKind.LOCAL_ENU)

    def _validate(self, args: dict, partial: bool = False) -> Optional[str]:
        if partial and "speed" not in args:
            return None
        if _positive(args.get("speed")) is None:
            return "speed must be a positive number"
        return None

    def _activate(self, args: dict, est: KinematicState) -> None:
        self._speed = float(args["speed"])
        self._settled_since: Optional[int] = None
        self._disarmed = False
        self._nominal_ns = int((max(est.position[2], 0.0) / self._speed + 2.0) * NS_PER_SEC)

    def _normalize_modify(self, args: dict) -> dict:
        return {"speed": float(args["speed"])} if "speed" in args else {}

    def _apply_modify(self, args: dict) -> None:
        self._speed = args.get("speed", self._speed)

    def _goal_reached(self, est: KinematicState, now: int) -> bool:
        # the platform's own touchdown detector outranks a noisy estimate
        info = self.reg.platform()
        on_pad = (info is not None and info.flight_status is FlightStatus.LANDED) or (
            abs(est.position[2]) < SETTLE_POSITION and abs(est.velocity[2]) < SETTLE_SPEED
        )
        if not on_pad:
            self._settled_since = None
            return False
        if self._settled_since is None:
            self._settled_since = now
        if now - self._settled_since < LAND_SETTLE_NS:
            return False
        if not self._disarmed:
            arm_srv = f"{self.ns}/platform/arm"
            if self.bus.has_service(arm_srv):
                reply = self.bus.call(arm_srv, {"value": False})
                if not reply.get("ok", False):
                    return False
            self._disarmed = True
        return True

    def _reference(self, est: KinematicState, now: int) -> MotionReference:
        return speed_reference(np.array([0.0, 0.0, -self._speed]), "earth", t=now)

    def _feedback(self, est: KinematicState, now: int) -> dict:
        return {"altitude": float(est.position[2]), "vertical_speed": float(est.velocity[2])}


class Hover(BehaviorServer):
    """Hold the activation pose until stopped or preempted by land."""

    name = "hover"

    def required_mode(self) -> ControlMode:
        return ControlMode(ControlKind.POSITION, YawKind.YAW_ANGLE, FrameKind.LOCAL_ENU)

    def _activate(self, args: dict, est: KinematicState) -> None:
        self._hold_point = est.position.copy()
        self._yaw = quat.yaw_of(est.orientation)
        self._nominal_ns = 0  # indefinite: no timeout

    def _stop_counts_as_success(self, est: KinematicState, now: int) -> bool:
        return float(np.linalg.norm(est.position - self._hold_point)) < CAPTURE_RADIUS

    def _reference(self, est: KinematicState, now: int) -> MotionReference:
        return position_reference(self._hold_point, "earth", self._yaw, t=now)

    def _feedback(self, est: KinematicState, now: int) -> dict:
        return {"hold_error": float(np.linalg.norm(est.position - self._hold_point))}


class GoTo(BehaviorServer):
    """Rest-to-rest flight to a single waypoint in any known frame."""

    name = "go_to"

    def required_mode(self) -> ControlMode:
        return ControlMode(ControlKind.TRAJECTORY, YawKind.YAW_ANGLE, FrameKind.LOCAL_ENU)

    def _validate(self, args: dict, partial: bool = False) -> Optional[str]:
        if not partial or "point" in args:
            if _point3(args.get("point")) is None:
                return "point must be a finite 3-vector"
        if not partial or "speed" in args:
            if _positive(args.get("speed")) is None:
                return "speed must be a positive number"
        if "yaw" in args and args["yaw"] is not None and _num(args["yaw"]) is None:
            return "yaw must be a number"
        return None

    def _activate(self, args: dict, est: KinematicState) -> None:
        frame = args.get("frame_id", "earth")
        target, frame_yaw = self.reg.earth_pose(_point3(args["point"]), frame)
        self._speed = float(args["speed"])
        yaw = args.get("yaw")
        self._fixed_yaw = None if yaw is None else _wrap(float(yaw) + frame_yaw)
        self._target = target
        self._plan_from(est)
        self._dirty = False

    def _plan_from(self, est: KinematicState) -> None:
        p0 = est.position.copy()
        self._t = 0.0
        if float(np.linalg.norm(self._target - p0)) < SETTLE_POSITION:
            self._traj: Optional[Trajectory] = None
            self._hold_yaw = self._fixed_yaw if self._fixed_yaw is not None else quat.yaw_of(est.orientation)
            self._nominal_ns = NS_PER_SEC
            return
        if self._fixed_yaw is not None:
            policy, angle = YawPolicy.FIXED, self._fixed_yaw
        else:
            policy, angle = YawPolicy.FACE_PATH, 0.0
        spec = TrajectorySpec(np.array([p0, self._target]), self._speed, "earth", policy, angle)
        self._traj = trajectory.plan(spec)
        self._nominal_ns = int((self._traj.duration + 1.0) * NS_PER_SEC)

    def _normalize_modify(self, args: dict) -> dict:
        out = {}
        if "point" in args:
            frame = args.get("frame_id", "earth")
            target, frame_yaw = self.reg.earth_pose(_point3(args["point"]), frame)
            out["target"] = target
            out["frame_yaw"] = frame_yaw
        if "speed" in args:
            out["speed"] = float(args["speed"])
        if "yaw" in args:
            out["yaw"] = None if args["yaw"] is None else float(args["yaw"])
        return out

    def _apply_modify(self, args: dict) -> None:
        if "target" in args:
            self._target = args["target"]
        if "speed" in args:
            self._speed = args["speed"]
        if "yaw" in args:
            yaw = args["yaw"]
            self._fixed_yaw = None if yaw is None else _wrap(yaw + args.get("frame_yaw", 0.0))
        self._dirty = True

    def _goal_reached(self, est: KinematicState, now: int) -> bool:
        if self._traj is not None and self._t < self._traj.duration:
            return False
        return (
            float(np.linalg.norm(est.position - self._target)) < SETTLE_POSITION
            and float(np.linalg.norm(est.velocity)) < SETTLE_SPEED
        )

    def _reference(self, est: KinematicState, now: int) -> MotionReference:
        if self._dirty:
            self._plan_from(est)
            self._active_ns = 0
            self._dirty = False
        if self._traj is None:
            return position_reference(self._target, "earth", self._hold_yaw, t=now)
        sp = self._traj.sample(self._t, fallback_yaw=quat.yaw_of(est.orientation))
        self._t += self._period_s
        return trajectory_reference(sp, "earth", t=now)

    def _feedback(self, est: KinematicState, now: int) -> dict:
        progress = 1.0 if self._traj is None else min(1.0, self._t / self._traj.duration)
        return {
            "distance": float(np.linalg.norm(est.position - self._target)),
            "progress": progress,
        }


class FollowPath(BehaviorServer):
    """Sequential waypoint legs with a capture radius between them."""

    name = "follow_path"

    def required_mode(self) -> ControlMode:
        return ControlMode(ControlKind.TRAJECTORY, YawKind.YAW_ANGLE, FrameKind.LOCAL_ENU)

    def _validate(self, args: dict, partial: bool = False) -> Optional[str]:
        if not partial or "points" in args:
            pts = args.get("points")
            if not isinstance(pts, (list, tuple)) or len(pts) == 0:
                return "points must be a non-empty list"
            if any(_point3(p) is None for p in pts):
                return "every point must be a finite 3-vector"
        if not partial or "speed" in args:
            if _positive(args.get("speed")) is None:
                return "speed must be a positive number"
        return None

    def _points_in_earth(self, pts, frame: str) -> list[np.ndarray]:
        return [self.reg.earth_pose(_point3(p), frame)[0] for p in pts]

    def _activate(self, args: dict, est: KinematicState) -> None:
        frame = args.get("frame_id", "earth")
        self._remaining = self._points_in_earth(args["points"], frame)
        self._total = len(self._remaining)
        self._speed = float(args["speed"])
        self._leg: Optional[Trajectory] = None
        self._leg_t = 0.0
        self._reset_nominal(est.position)

    def _reset_nominal(self, p0: np.ndarray) -> None:
        length = 0.0
        prev = p0
        for p in self._remaining:
            length += float(np.linalg.norm(p - prev))
            prev = p
        self._nominal_ns = int((length / self._speed + 2.0 * len(self._remaining) + 1.0) * NS_PER_SEC)
        self._active_ns = 0

    def _normalize_modify(self, args: dict) -> dict:
        out = {}
        if "points" in args:
            frame = args.get("frame_id", "earth")
            out["points"] = self._points_in_earth(args["points"], frame)
        if "speed" in args:
            out["speed"] = float(args["speed"])
        return out

    def _apply_modify(self, args: dict) -> None:
        if "points" in args:
            self._remaining = list(args["points"])
            self._total = len(self._remaining)
        if "speed" in args:
            self._speed = args["speed"]
        self._leg = None  # replan the current leg under the new arguments
        est = self.reg.estimate()
        self._reset_nominal(est.position if est is not None else self._remaining[0])

    def _goal_reached(self, est: KinematicState, now: int) -> bool:
        if len(self._remaining) != 1:
            return False
        return (
            float(np.linalg.norm(est.position - self._remaining[0])) < SETTLE_POSITION
            and float(np.linalg.norm(est.velocity)) < SETTLE_SPEED
        )

    def _reference(self, est: KinematicState, now: int) -> MotionReference:
        target = self._remaining[0]
        # capture: advance past intermediate waypoints without settling
        while len(self._remaining) > 1 and float(np.linalg.norm(est.position - target)) < CAPTURE_RADIUS:
            self._remaining.pop(0)
            target = self._remaining[0]
            self._leg = None
        if self._leg is None:
            p0 = est.position.copy()
            self._leg_t = 0.0
            if float(np.linalg.norm(target - p0)) >= SETTLE_POSITION:
                spec = TrajectorySpec(
                    np.array([p0, target]), self._speed, "earth", YawPolicy.FACE_PATH, 0.0
                )
                self._leg = trajectory.plan(spec)
        if self._leg is None:
            return position_reference(target, "earth", quat.yaw_of(est.orientation), t=now)
        sp = self._leg.sample(self._leg_t, fallback_yaw=quat.yaw_of(est.orientation))
        self._leg_t += self._period_s
        return trajectory_reference(sp, "earth", t=now)

    def _feedback(self, est: KinematicState, now: int) -> dict:
        return {
            "waypoints_done": self._total - len(self._remaining),
            "waypoints_total": self._total,
            "distance_to_next": float(np.linalg.norm(est.position - self._remaining[0])),
            "speed": self._speed,
        }


class FollowTrajectory(BehaviorServer):
    """Single smooth spline through all waypoints, streamed at the control rate."""

    name = "follow_trajectory"

    def required_mode(self) -> ControlMode:
        return ControlMode(ControlKind.TRAJECTORY, YawKind.YAW_ANGLE, FrameKind.LOCAL_ENU)

    def _validate(self, args: dict, partial: bool = False) -> Optional[str]:
        if not partial or "points" in args:
            pts = args.get("points")
            if not isinstance(pts, (list, tuple)) or len(pts) == 0:
                return "points must be a non-empty list"
            if any(_point3(p) is None for p in pts):
                return "every point must be a finite 3-vector"
        if not partial or "speed" in args:
            if _positive(args.get("speed")) is None:
                return "speed must be a positive number"
        if "yaw" in args and args["yaw"] is not None and _num(args["yaw"]) is None:
            return "yaw must be a number"
        return None

    def _activate(self, args: dict, est: KinematicState) -> None:
        frame = args.get("frame_id", "earth")
        pts = [self.reg.earth_pose(_point3(p), frame)[0] for p in args["points"]]
        yaw = args.get("yaw")
        if yaw is not None:
            _, frame_yaw = self.reg.earth_pose(np.zeros(3), frame)
            yaw = _wrap(float(yaw) + frame_yaw)
        self._fixed_yaw = yaw
        self._speed = float(args["speed"])
        self._waypoints = pts
        self._plan_from(est)
        self._dirty = False

    def _plan_from(self, est: KinematicState) -> None:
        pts = [est.position.copy()] + list(self._waypoints)
        if self._fixed_yaw is not None:
            policy, angle = YawPolicy.FIXED, self._fixed_yaw
        else:
            policy, angle = YawPolicy.FACE_PATH, 0.0
        spec = TrajectorySpec(np.array(pts), self._speed, "earth", policy, angle)
        self._traj = trajectory.plan(spec)
        self._t = 0.0
        self._nominal_ns = int((self._traj.duration + 1.0) * NS_PER_SEC)

    def _normalize_modify(self, args: dict) -> dict:
        out = {}
        if "points" in args:
            frame = args.get("frame_id", "earth")
            out["points"] = [self.reg.earth_pose(_point3(p), frame)[0] for p in args["points"]]
        if "speed" in args:
            out["speed"] = float(args["speed"])
        return out

    def _apply_modify(self, args: dict) -> None:
        if "points" in args:
            self._waypoints = list(args["points"])
        if "speed" in args:
            self._speed = args["speed"]
        self._dirty = True

    def _goal_reached(self, est: KinematicState, now: int) -> bool:
        if self._t < self._traj.duration:
            return False
        end = self._waypoints[-1]
        return (
            float(np.linalg.norm(est.position - end)) < SETTLE_POSITION
            and float(np.linalg.norm(est.velocity)) < SETTLE_SPEED
        )

    def _reference(self, est: KinematicState, now: int) -> MotionReference:
        if self._dirty:
            self._plan_from(est)
            self._active_ns = 0
            self._dirty = False
        sp = self._traj.sample(self._t, fallback_yaw=quat.yaw_of(est.orientation))
        self._t += self._period_s
        return trajectory_reference(sp, "earth", t=now)

    def _feedback(self, est: KinematicState, now: int) -> dict:
        return {
            "progress": min(1.0, self._t / self._traj.duration),
            "distance_to_end": float(np.linalg.norm(est.position - self._waypoints[-1])),
        }


def _wrap(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))
