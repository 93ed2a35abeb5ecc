"""Shared message definitions exchanged between all stack layers.

Every type has a canonical JSON encoding (vectors as 3-element arrays,
quaternions as [w, x, y, z]) used by the bus debug log, mission
documents, and the ground-station wire protocol.  Values are immutable
after construction; ``validate`` reports every invariant violation
instead of raising.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import Any, Optional

import numpy as np

GRAVITY = 9.80665  # m/s^2

UNIT_NORM_TOL = 1e-9


class ControlKind(enum.Enum):
    UNSET = "UNSET"
    HOVER = "HOVER"
    POSITION = "POSITION"
    SPEED = "SPEED"
    TRAJECTORY = "TRAJECTORY"
    ATTITUDE = "ATTITUDE"
    ACRO = "ACRO"


class YawKind(enum.Enum):
    YAW_ANGLE = "YAW_ANGLE"
    YAW_SPEED = "YAW_SPEED"
    YAW_NONE = "YAW_NONE"


class FrameKind(enum.Enum):
    LOCAL_ENU = "LOCAL_ENU"
    BODY_FLU = "BODY_FLU"
    GLOBAL_GEO = "GLOBAL_GEO"


class FlightStatus(enum.Enum):
    LANDED = "LANDED"
    FLYING = "FLYING"
    EMERGENCY = "EMERGENCY"


class BehaviorState(enum.Enum):
    IDLE = "IDLE"
    RUNNING = "RUNNING"
    PAUSED = "PAUSED"


class BehaviorResult(enum.Enum):
    NONE = "NONE"
    SUCCESS = "SUCCESS"
    FAILURE = "FAILURE"


def _vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {a.shape}")
    return a


def _quat(q) -> np.ndarray:
    a = np.asarray(q, dtype=float)
    if a.shape != (4,):
        raise ValueError(f"expected quaternion [w,x,y,z], got shape {a.shape}")
    return a


@dataclass(frozen=True)
class ControlMode:
    """Contract triple a command producer or consumer supports."""

    control_kind: ControlKind = ControlKind.UNSET
    yaw_kind: YawKind = YawKind.YAW_NONE
    frame_kind: FrameKind = FrameKind.LOCAL_ENU

    def to_json(self) -> dict:
        return {
            "control_kind": self.control_kind.value,
            "yaw_kind": self.yaw_kind.value,
            "frame_kind": self.frame_kind.value,
        }

    @staticmethod
    def from_json(d: dict) -> "ControlMode":
        return ControlMode(
            ControlKind(d["control_kind"]), YawKind(d["yaw_kind"]), FrameKind(d["frame_kind"])
        )


@dataclass(frozen=True)
class KinematicState:
    """Estimated or true pose and twist of one drone in a named frame."""

    frame_id: str
    t: int  # ns
    position: np.ndarray
    velocity: np.ndarray
    orientation: np.ndarray  # unit quaternion, world <- body
    angular_velocity: np.ndarray  # rad/s, body frame

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position))
        object.__setattr__(self, "velocity", _vec3(self.velocity))
        object.__setattr__(self, "orientation", _quat(self.orientation))
        object.__setattr__(self, "angular_velocity", _vec3(self.angular_velocity))

    def to_json(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "t": self.t,
            "position": list(self.position),
            "velocity": list(self.velocity),
            "orientation": list(self.orientation),
            "angular_velocity": list(self.angular_velocity),
        }

    @staticmethod
    def from_json(d: dict) -> "KinematicState":
        return KinematicState(
            d["frame_id"],
            d["t"],
            d["position"],
            d["velocity"],
            d["orientation"],
            d["angular_velocity"],
        )


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 geodetic coordinate; altitude is ellipsoidal meters."""

    latitude: float
    longitude: float
    altitude: float

    def to_json(self) -> dict:
        return {"latitude": self.latitude, "longitude": self.longitude, "altitude": self.altitude}

    @staticmethod
    def from_json(d: dict) -> "GeoPoint":
        return GeoPoint(d["latitude"], d["longitude"], d["altitude"])


@dataclass(frozen=True)
class Transform:
    """Timestamped rigid transform mapping child-frame points into the parent frame."""

    parent: str
    child: str
    translation: np.ndarray
    rotation: np.ndarray  # unit quaternion
    t: int  # ns

    def __post_init__(self):
        object.__setattr__(self, "translation", _vec3(self.translation))
        object.__setattr__(self, "rotation", _quat(self.rotation))

    def to_json(self) -> dict:
        return {
            "parent": self.parent,
            "child": self.child,
            "translation": list(self.translation),
            "rotation": list(self.rotation),
            "t": self.t,
        }

    @staticmethod
    def from_json(d: dict) -> "Transform":
        return Transform(d["parent"], d["child"], d["translation"], d["rotation"], d["t"])


@dataclass(frozen=True)
class TrajectorySetpoint:
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position))
        object.__setattr__(self, "velocity", _vec3(self.velocity))
        object.__setattr__(self, "acceleration", _vec3(self.acceleration))

    def to_json(self) -> dict:
        return {
            "position": list(self.position),
            "velocity": list(self.velocity),
            "acceleration": list(self.acceleration),
            "yaw": self.yaw,
        }

    @staticmethod
    def from_json(d: dict) -> "TrajectorySetpoint":
        return TrajectorySetpoint(d["position"], d["velocity"], d["acceleration"], d["yaw"])


@dataclass(frozen=True)
class MotionReference:
    """Setpoint stream entry consumed by the motion controller.

    Exactly one payload field is set, matching mode.control_kind:
    position/speed setpoints carry an optional yaw (angle or rate per
    yaw_kind), trajectory carries a full flat-output sample, attitude
    carries quaternion + collective thrust, acro carries body rates +
    collective thrust.
    """

    mode: ControlMode
    frame_id: str
    t: int = 0
    position: Optional[np.ndarray] = None
    velocity: Optional[np.ndarray] = None
    trajectory: Optional[TrajectorySetpoint] = None
    attitude: Optional[np.ndarray] = None  # quaternion
    body_rates: Optional[np.ndarray] = None
    thrust: Optional[float] = None  # N, collective
    yaw: Optional[float] = None  # rad (YAW_ANGLE) or rad/s (YAW_SPEED)

    def __post_init__(self):
        for name in ("position", "velocity", "body_rates"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _vec3(v))
        if self.attitude is not None:
            object.__setattr__(self, "attitude", _quat(self.attitude))

    def to_json(self) -> dict:
        d: dict[str, Any] = {
            "mode": self.mode.to_json(),
            "frame_id": self.frame_id,
            "t": self.t,
        }
        if self.position is not None:
            d["position"] = list(self.position)
        if self.velocity is not None:
            d["velocity"] = list(self.velocity)
        if self.trajectory is not None:
            d["trajectory"] = self.trajectory.to_json()
        if self.attitude is not None:
            d["attitude"] = list(self.attitude)
        if self.body_rates is not None:
            d["body_rates"] = list(self.body_rates)
        if self.thrust is not None:
            d["thrust"] = self.thrust
        if self.yaw is not None:
            d["yaw"] = self.yaw
        return d

    @staticmethod
    def from_json(d: dict) -> "MotionReference":
        traj = d.get("trajectory")
        return MotionReference(
            mode=ControlMode.from_json(d["mode"]),
            frame_id=d["frame_id"],
            t=d.get("t", 0),
            position=d.get("position"),
            velocity=d.get("velocity"),
            trajectory=TrajectorySetpoint.from_json(traj) if traj is not None else None,
            attitude=d.get("attitude"),
            body_rates=d.get("body_rates"),
            thrust=d.get("thrust"),
            yaw=d.get("yaw"),
        )


@dataclass(frozen=True)
class ActuatorCommand:
    """Platform-facing command; mode must be one the platform advertises."""

    mode: ControlMode
    t: int = 0
    position: Optional[np.ndarray] = None
    velocity: Optional[np.ndarray] = None
    attitude: Optional[np.ndarray] = None
    body_rates: Optional[np.ndarray] = None
    thrust: Optional[float] = None
    yaw: Optional[float] = None

    def __post_init__(self):
        for name in ("position", "velocity", "body_rates"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _vec3(v))
        if self.attitude is not None:
            object.__setattr__(self, "attitude", _quat(self.attitude))

    def to_json(self) -> dict:
        d: dict[str, Any] = {"mode": self.mode.to_json(), "t": self.t}
        for name in ("position", "velocity", "attitude", "body_rates"):
            v = getattr(self, name)
            if v is not None:
                d[name] = list(v)
        if self.thrust is not None:
            d["thrust"] = self.thrust
        if self.yaw is not None:
            d["yaw"] = self.yaw
        return d

    @staticmethod
    def from_json(d: dict) -> "ActuatorCommand":
        return ActuatorCommand(
            mode=ControlMode.from_json(d["mode"]),
            t=d.get("t", 0),
            position=d.get("position"),
            velocity=d.get("velocity"),
            attitude=d.get("attitude"),
            body_rates=d.get("body_rates"),
            thrust=d.get("thrust"),
            yaw=d.get("yaw"),
        )


@dataclass(frozen=True)
class PlatformInfo:
    connected: bool = True
    armed: bool = False
    offboard: bool = False
    flight_status: FlightStatus = FlightStatus.LANDED
    active_mode: ControlMode = field(default_factory=ControlMode)
    supported_modes: tuple[ControlMode, ...] = ()

    def to_json(self) -> dict:
        return {
            "connected": self.connected,
            "armed": self.armed,
            "offboard": self.offboard,
            "flight_status": self.flight_status.value,
            "active_mode": self.active_mode.to_json(),
            "supported_modes": [m.to_json() for m in self.supported_modes],
        }

    @staticmethod
    def from_json(d: dict) -> "PlatformInfo":
        return PlatformInfo(
            d["connected"],
            d["armed"],
            d["offboard"],
            FlightStatus(d["flight_status"]),
            ControlMode.from_json(d["active_mode"]),
            tuple(ControlMode.from_json(m) for m in d.get("supported_modes", [])),
        )


@dataclass(frozen=True)
class BehaviorStatus:
    state: BehaviorState = BehaviorState.IDLE
    last_result: BehaviorResult = BehaviorResult.NONE
    feedback: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "state": self.state.value,
            "last_result": self.last_result.value,
            "feedback": dict(self.feedback),
        }

    @staticmethod
    def from_json(d: dict) -> "BehaviorStatus":
        return BehaviorStatus(
            BehaviorState(d["state"]), BehaviorResult(d["last_result"]), d.get("feedback", {})
        )


# --- constructors guaranteeing valid values ---------------------------------


def position_reference(p, frame_id: str, yaw: Optional[float] = None, t: int = 0) -> MotionReference:
    yk = YawKind.YAW_ANGLE if yaw is not None else YawKind.YAW_NONE
    return MotionReference(
        mode=ControlMode(ControlKind.POSITION, yk, FrameKind.LOCAL_ENU),
        frame_id=frame_id,
        t=t,
        position=p,
        yaw=yaw,
    )


def speed_reference(v, frame_id: str, yaw_rate: Optional[float] = None, t: int = 0) -> MotionReference:
    yk = YawKind.YAW_SPEED if yaw_rate is not None else YawKind.YAW_NONE
    return MotionReference(
        mode=ControlMode(ControlKind.SPEED, yk, FrameKind.LOCAL_ENU),
        frame_id=frame_id,
        t=t,
        velocity=v,
        yaw=yaw_rate,
    )


def trajectory_reference(sp: TrajectorySetpoint, frame_id: str, t: int = 0) -> MotionReference:
    return MotionReference(
        mode=ControlMode(ControlKind.TRAJECTORY, YawKind.YAW_ANGLE, FrameKind.LOCAL_ENU),
        frame_id=frame_id,
        t=t,
        trajectory=sp,
    )


def hover_reference(frame_id: str, t: int = 0) -> MotionReference:
    return MotionReference(
        mode=ControlMode(ControlKind.HOVER, YawKind.YAW_NONE, FrameKind.LOCAL_ENU),
        frame_id=frame_id,
        t=t,
    )


# --- validation --------------------------------------------------------------

_PAYLOAD_FOR_KIND = {
    ControlKind.POSITION: "position",
    ControlKind.SPEED: "velocity",
    ControlKind.TRAJECTORY: "trajectory",
    ControlKind.ATTITUDE: "attitude",
    ControlKind.ACRO: "body_rates",
}


def _check_unit(name: str, q: np.ndarray, out: list):
    n = float(np.linalg.norm(q))
    if not math.isfinite(n) or abs(n - 1.0) > UNIT_NORM_TOL:
        out.append(f"{name}: quaternion norm {n!r} not within {UNIT_NORM_TOL} of 1")


def _validate_mode(mode: ControlMode, prefix: str, out: list):
    if mode.control_kind is ControlKind.HOVER and mode.yaw_kind is not YawKind.YAW_NONE:
        out.append(f"{prefix}: HOVER requires YAW_NONE")
    if mode.control_kind is ControlKind.ACRO and mode.frame_kind is not FrameKind.BODY_FLU:
        out.append(f"{prefix}: ACRO requires BODY_FLU frame")


def _validate_payload(msg, prefix: str, out: list):
    kind = msg.mode.control_kind
    want = _PAYLOAD_FOR_KIND.get(kind)
    payload_fields = ["position", "velocity", "attitude", "body_rates"]
    if hasattr(msg, "trajectory"):
        payload_fields.append("trajectory")
    present = [n for n in payload_fields if getattr(msg, n, None) is not None]
    if want is None:  # HOVER / UNSET carry no payload
        if present:
            out.append(f"{prefix}: mode {kind.value} carries no payload, got {present}")
    elif want not in present:
        out.append(f"{prefix}: mode {kind.value} requires payload '{want}'")
    else:
        extra = [n for n in present if n != want]
        if extra:
            out.append(f"{prefix}: payload fields {extra} inconsistent with mode {kind.value}")
    if kind in (ControlKind.ATTITUDE, ControlKind.ACRO) and msg.thrust is None:
        out.append(f"{prefix}: mode {kind.value} requires thrust")
    if msg.thrust is not None and msg.thrust < 0:
        out.append("thrust: must be >= 0")


def validate(msg: Any) -> list[str]:
    """Return every invariant violation with its field path (total function)."""
    out: list[str] = []
    if isinstance(msg, ControlMode):
        _validate_mode(msg, "mode", out)
    elif isinstance(msg, KinematicState):
        _check_unit("orientation", msg.orientation, out)
        if not np.all(np.isfinite(msg.position)):
            out.append("position: non-finite")
        if not np.all(np.isfinite(msg.velocity)):
            out.append("velocity: non-finite")
    elif isinstance(msg, GeoPoint):
        if not (-90.0 <= msg.latitude <= 90.0):
            out.append("latitude out of range [-90, 90]")
        if not (-180.0 <= msg.longitude < 180.0):
            out.append("longitude out of range [-180, 180)")
        if not math.isfinite(msg.altitude):
            out.append("altitude: non-finite")
    elif isinstance(msg, Transform):
        _check_unit("rotation", msg.rotation, out)
        if msg.parent == msg.child:
            out.append("parent == child")
    elif isinstance(msg, (MotionReference, ActuatorCommand)):
        _validate_mode(msg.mode, "mode", out)
        _validate_payload(msg, "payload", out)
        if isinstance(msg, MotionReference) and msg.attitude is not None:
            _check_unit("attitude", msg.attitude, out)
    elif isinstance(msg, PlatformInfo):
        if msg.offboard and not msg.connected:
            out.append("offboard requires connected")
        if msg.flight_status is FlightStatus.FLYING and not msg.armed:
            out.append("FLYING requires armed")
        _validate_mode(msg.active_mode, "active_mode", out)
    elif isinstance(msg, BehaviorStatus):
        if msg.state is BehaviorState.IDLE and msg.feedback:
            out.append("feedback must be empty when IDLE")
    elif isinstance(msg, TrajectorySetpoint):
        pass
    else:
        out.append(f"unknown message type {type(msg).__name__}")
    return out


_TYPES = {
    "ControlMode": ControlMode,
    "KinematicState": KinematicState,
    "GeoPoint": GeoPoint,
    "Transform": Transform,
    "TrajectorySetpoint": TrajectorySetpoint,
    "MotionReference": MotionReference,
    "ActuatorCommand": ActuatorCommand,
    "PlatformInfo": PlatformInfo,
    "BehaviorStatus": BehaviorStatus,
}


def encode(msg: Any) -> dict:
    """Canonical JSON dict with a type tag, round-tripped by decode()."""
    if isinstance(msg, dict):
        return {"type": "dict", "data": msg}
    return {"type": type(msg).__name__, "data": msg.to_json()}


def decode(d: dict) -> Any:
    name = d["type"]
    if name == "dict":
        return d["data"]
    return _TYPES[name].from_json(d["data"])


def equal(a: Any, b: Any) -> bool:
    """Exact structural equality, tolerating numpy array fields."""
    if type(a) is not type(b):
        return False
    if isinstance(a, dict):
        return a == b
    for f in fields(a):
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if isinstance(va, np.ndarray):
            if not np.array_equal(va, vb):
                return False
        elif isinstance(va, TrajectorySetpoint) or (
            hasattr(va, "__dataclass_fields__") and va is not None
        ):
            if va is None or vb is None:
                if va is not vb:
                    return False
            elif not equal(va, vb):
                return False
        elif va != vb:
            return False
    return True
