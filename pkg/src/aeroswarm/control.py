"""Motion controller layer: plugin selection, mode negotiation, frame adaptation.

The controller sits between behavior-generated motion references and the
platform.  Each tick it snapshots the latest reference and state
estimate, re-expresses the reference in the control frame, negotiates a
(plugin input, plugin output) mode pair against the platform's
advertised modes (or bypasses the plugin entirely), and runs the active
plugin to produce one actuator command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import quat
from .bus import MessageBus
from .geodesy import GeoOrigin, geo_to_enu
from .msgs import (
    GRAVITY,
    ActuatorCommand,
    ControlKind,
    ControlMode,
    FrameKind,
    GeoPoint,
    KinematicState,
    MotionReference,
    PlatformInfo,
    TrajectorySetpoint,
    YawKind,
)
from .tf import TfError, TfTree

STALE_STATE_NS = 200_000_000  # suppress commands when the estimate is older than this
THRUST_EPS_FACTOR = 0.05  # ||F|| below this fraction of weight counts as free-fall
THRUST_FLOOR_FACTOR = 0.25  # thrust commanded while riding through the singularity

# fixed priority order used by negotiation; unlisted kinds rank below all listed
KIND_RANK = {
    ControlKind.ACRO: 4,
    ControlKind.ATTITUDE: 3,
    ControlKind.SPEED: 2,
    ControlKind.POSITION: 1,
}
YAW_RANK = {YawKind.YAW_ANGLE: 2, YawKind.YAW_SPEED: 1, YawKind.YAW_NONE: 0}
FRAME_RANK = {FrameKind.LOCAL_ENU: 2, FrameKind.BODY_FLU: 1, FrameKind.GLOBAL_GEO: 0}


class NegotiationError(RuntimeError):
    pass


class AdaptationError(RuntimeError):
    pass


def mode_label(m: ControlMode) -> str:
    return f"{m.control_kind.value}/{m.yaw_kind.value}/{m.frame_kind.value}"


def output_rank(m: ControlMode) -> tuple[int, int, int]:
    return (KIND_RANK.get(m.control_kind, 0), YAW_RANK[m.yaw_kind], FRAME_RANK[m.frame_kind])


@dataclass(frozen=True)
class ControllerPluginDescriptor:
    """What one controller plugin offers: every (input, output) mode pair it implements."""

    name: str
    pairs: tuple[tuple[ControlMode, ControlMode], ...]
    gains: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("plugin must declare at least one mode pair")


@dataclass(frozen=True)
class NegotiationResult:
    bypass: bool
    input_mode: ControlMode
    output_mode: ControlMode
    rationale: tuple[str, ...]


def negotiate(
    ref_mode: ControlMode,
    plugin: ControllerPluginDescriptor,
    platform_modes: Sequence[ControlMode],
) -> NegotiationResult:
    """Pick how a reference stream reaches the platform.

    A reference the platform accepts directly bypasses the plugin.
    Otherwise, among the plugin pairs whose input equals the reference
    mode and whose output the platform accepts, the output ranking
    ACRO > ATTITUDE > SPEED > POSITION wins, with ties broken on yaw
    kind (YAW_ANGLE > YAW_SPEED > YAW_NONE), then frame kind
    (LOCAL_ENU > BODY_FLU > GLOBAL_GEO), then declaration order.
    """
    accepted = set(platform_modes)
    rationale: list[str] = []
    if ref_mode in accepted:
        rationale.append(f"bypass: platform accepts {mode_label(ref_mode)} directly")
        return NegotiationResult(True, ref_mode, ref_mode, tuple(rationale))
    best: Optional[tuple[ControlMode, ControlMode]] = None
    best_key: Optional[tuple] = None
    for idx, (mode_in, mode_out) in enumerate(plugin.pairs):
        if mode_in != ref_mode:
            continue
        label = f"{plugin.name}: {mode_label(mode_in)} -> {mode_label(mode_out)}"
        if mode_out not in accepted:
            rationale.append(f"{label}: rejected, output not platform-accepted")
            continue
        key = (*output_rank(mode_out), -idx)
        rationale.append(f"{label}: feasible, rank {key[:3]}")
        if best_key is None or key > best_key:
            best, best_key = (mode_in, mode_out), key
    if best is None:
        raise NegotiationError(
            f"no feasible mode pair: reference {mode_label(ref_mode)}, plugin {plugin.name}, "
            f"platform accepts [{', '.join(sorted(mode_label(m) for m in accepted))}]"
        )
    rationale.append(f"selected {mode_label(best[0])} -> {mode_label(best[1])}")
    return NegotiationResult(False, best[0], best[1], tuple(rationale))


# --- frame adaptation ---------------------------------------------------------


def adapt_frames(
    ref: MotionReference,
    target_frame: str,
    tf_tree: Optional[TfTree] = None,
    origin: Optional[GeoOrigin] = None,
    at_time: Optional[int] = None,
) -> MotionReference:
    """Re-express a motion reference in target_frame (an earth-fixed ENU frame).

    Positions are transformed, velocities/accelerations rotated, yaw
    angles offset by the frame heading; yaw rates and body rates are
    frame-invariant here.
    """
    if ref.mode.frame_kind is FrameKind.GLOBAL_GEO:
        if origin is None:
            raise AdaptationError("geodetic reference but no origin set")
        updates: dict = {"frame_id": target_frame, "mode": replace(ref.mode, frame_kind=FrameKind.LOCAL_ENU)}
        if ref.position is not None:
            gp = GeoPoint(float(ref.position[0]), float(ref.position[1]), float(ref.position[2]))
            updates["position"] = geo_to_enu(gp, origin)
        return replace(ref, **updates)

    if ref.frame_id == target_frame:
        if ref.mode.frame_kind is FrameKind.LOCAL_ENU:
            return ref
        # body-kinded payload already tagged with the target frame id
        return replace(ref, mode=replace(ref.mode, frame_kind=FrameKind.LOCAL_ENU))

    if tf_tree is None:
        raise AdaptationError(f"no TF tree to map '{ref.frame_id}' into '{target_frame}'")
    xf = tf_tree.lookup(target_frame, ref.frame_id, at_time)
    rot = xf.rotation
    frame_yaw = quat.yaw_of(rot)
    updates = {"frame_id": target_frame, "mode": replace(ref.mode, frame_kind=FrameKind.LOCAL_ENU)}
    if ref.position is not None:
        updates["position"] = xf.apply(ref.position)
    if ref.velocity is not None:
        updates["velocity"] = quat.rotate(rot, ref.velocity)
    if ref.trajectory is not None:
        tr = ref.trajectory
        updates["trajectory"] = TrajectorySetpoint(
            position=xf.apply(tr.position),
            velocity=quat.rotate(rot, tr.velocity),
            acceleration=quat.rotate(rot, tr.acceleration),
            yaw=_wrap(tr.yaw + frame_yaw),
        )
    if ref.attitude is not None:
        updates["attitude"] = quat.multiply(rot, ref.attitude)
    if ref.yaw is not None and ref.mode.yaw_kind is YawKind.YAW_ANGLE:
        updates["yaw"] = _wrap(ref.yaw + frame_yaw)
    return replace(ref, **updates)


def _wrap(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


# --- controller plugins -------------------------------------------------------


def _enu_modes(kinds: Sequence[ControlKind]) -> list[ControlMode]:
    out = []
    for k in kinds:
        yaws = (YawKind.YAW_NONE,) if k is ControlKind.HOVER else (
            YawKind.YAW_ANGLE,
            YawKind.YAW_SPEED,
            YawKind.YAW_NONE,
        )
        for y in yaws:
            out.append(ControlMode(k, y, FrameKind.LOCAL_ENU))
    return out


def _flat_outputs(ref: MotionReference, state: KinematicState) -> tuple:
    """(p_ref, v_ref, a_ref, yaw_angle, yaw_rate) with Nones for absent parts."""
    kind = ref.mode.control_kind
    yaw_angle = yaw_rate = None
    if ref.mode.yaw_kind is YawKind.YAW_ANGLE and ref.yaw is not None:
        yaw_angle = ref.yaw
    elif ref.mode.yaw_kind is YawKind.YAW_SPEED and ref.yaw is not None:
        yaw_rate = ref.yaw
    if kind is ControlKind.TRAJECTORY:
        tr = ref.trajectory
        if ref.mode.yaw_kind is YawKind.YAW_ANGLE:
            yaw_angle = tr.yaw
        return tr.position, tr.velocity, tr.acceleration, yaw_angle, yaw_rate
    if kind is ControlKind.POSITION:
        return ref.position, np.zeros(3), np.zeros(3), yaw_angle, yaw_rate
    if kind is ControlKind.SPEED:
        return None, ref.velocity, np.zeros(3), yaw_angle, yaw_rate
    if kind is ControlKind.HOVER:
        return None, np.zeros(3), np.zeros(3), None, None
    raise NegotiationError(f"plugin has no flat-output form for {kind.value}")


class PidCascade:
    """Outer-loop P position controller emitting platform speed commands."""

    NAME = "pid_cascade"

    def __init__(self, kp: float = 1.8, v_max: float = 3.0, kyaw: float = 1.5):
        self.kp = kp
        self.v_max = v_max
        self.kyaw = kyaw
        self._hover_point: Optional[np.ndarray] = None
        inputs = _enu_modes([ControlKind.POSITION, ControlKind.SPEED, ControlKind.TRAJECTORY, ControlKind.HOVER])
        outputs = _enu_modes([ControlKind.SPEED])
        self.descriptor = ControllerPluginDescriptor(
            self.NAME,
            tuple((i, o) for i in inputs for o in outputs),
            {"kp": kp, "v_max": v_max, "kyaw": kyaw},
        )

    def reset(self) -> None:
        self._hover_point = None

    def step(
        self, state: KinematicState, ref: MotionReference, out_mode: ControlMode, dt: float
    ) -> ActuatorCommand:
        p_ref, v_ref, _, yaw_angle, yaw_rate = _flat_outputs(ref, state)
        if ref.mode.control_kind is ControlKind.HOVER:
            if self._hover_point is None:
                self._hover_point = state.position.copy()
            p_ref = self._hover_point
        else:
            self._hover_point = None
        v_cmd = np.asarray(v_ref, dtype=float).copy()
        if p_ref is not None:
            v_cmd = v_cmd + self.kp * (np.asarray(p_ref) - state.position)
        n = float(np.linalg.norm(v_cmd))
        if n > self.v_max:
            v_cmd *= self.v_max / n
        yaw_now = quat.yaw_of(state.orientation)
        yaw_out: Optional[float]
        if out_mode.yaw_kind is YawKind.YAW_ANGLE:
            if yaw_angle is not None:
                yaw_out = yaw_angle
            elif yaw_rate is not None:
                yaw_out = _wrap(yaw_now + yaw_rate * dt)
            else:
                yaw_out = yaw_now
        elif out_mode.yaw_kind is YawKind.YAW_SPEED:
            if yaw_rate is not None:
                yaw_out = yaw_rate
            elif yaw_angle is not None:
                yaw_out = self.kyaw * _wrap(yaw_angle - yaw_now)
            else:
                yaw_out = 0.0
        else:
            yaw_out = None
        return ActuatorCommand(mode=out_mode, t=ref.t, velocity=v_cmd, yaw=yaw_out)


class DfTracker:
    """Differential-flatness tracker emitting body rates + collective thrust.

    a_des = a_ref + Kv (v_ref - v) + Kp (p_ref - p)
    F     = m (a_des + g e3)
    z_b   = F / ||F||,  thrust = F . (R e3)
    rates = -K_R vee(0.5 (R_des^T R - R^T R_des)),  R_des from (z_b, yaw_ref)
    """

    NAME = "df_tracker"

    def __init__(
        self,
        mass: float,
        max_thrust: float,
        kp: Sequence[float] = (4.0, 4.0, 5.0),
        kv: Sequence[float] = (4.5, 4.5, 5.5),
        kr: Sequence[float] = (9.0, 9.0, 5.0),
    ):
        self.mass = mass
        self.max_thrust = max_thrust
        self.kp = np.asarray(kp, dtype=float)
        self.kv = np.asarray(kv, dtype=float)
        self.kr = np.asarray(kr, dtype=float)
        self._hover_point: Optional[np.ndarray] = None
        inputs = _enu_modes([ControlKind.TRAJECTORY, ControlKind.POSITION, ControlKind.SPEED, ControlKind.HOVER])
        outputs = [
            ControlMode(ControlKind.ACRO, YawKind.YAW_NONE, FrameKind.BODY_FLU),
            ControlMode(ControlKind.ATTITUDE, YawKind.YAW_ANGLE, FrameKind.LOCAL_ENU),
        ]
        self.descriptor = ControllerPluginDescriptor(
            self.NAME,
            tuple((i, o) for i in inputs for o in outputs),
            {"mass": mass, "kp": list(self.kp), "kv": list(self.kv), "kr": list(self.kr)},
        )

    def reset(self) -> None:
        self._hover_point = None

    def step(
        self, state: KinematicState, ref: MotionReference, out_mode: ControlMode, dt: float
    ) -> ActuatorCommand:
        p_ref, v_ref, a_ref, yaw_angle, yaw_rate = _flat_outputs(ref, state)
        if ref.mode.control_kind is ControlKind.HOVER:
            if self._hover_point is None:
                self._hover_point = state.position.copy()
            p_ref = self._hover_point
        else:
            self._hover_point = None
        e_p = (np.asarray(p_ref) - state.position) if p_ref is not None else np.zeros(3)
        a_des = np.asarray(a_ref) + self.kv * (np.asarray(v_ref) - state.velocity) + self.kp * e_p
        f_world = self.mass * (a_des + GRAVITY * np.array([0.0, 0.0, 1.0]))
        f_norm = float(np.linalg.norm(f_world))
        rot = quat.to_matrix(state.orientation)
        yaw_now = quat.yaw_of(state.orientation)
        if f_norm < THRUST_EPS_FACTOR * self.mass * GRAVITY:
            # free-fall singularity: hold current attitude on a thrust floor
            thrust = THRUST_FLOOR_FACTOR * self.mass * GRAVITY
            q_des = state.orientation.copy()
            rates = np.zeros(3)
            yaw_ref = yaw_now
        else:
            z_b = f_world / f_norm
            thrust = float(np.clip(float(f_world @ rot[:, 2]), 0.0, self.max_thrust))
            yaw_ref = yaw_angle if yaw_angle is not None else yaw_now
            q_des = quat.from_z_yaw(z_b, yaw_ref)
            r_des = quat.to_matrix(q_des)
            err = 0.5 * (r_des.T @ rot - rot.T @ r_des)
            e_r = np.array([err[2, 1], err[0, 2], err[1, 0]])
            rates = -self.kr * e_r
        if yaw_rate is not None:
            rates = rates + np.array([0.0, 0.0, yaw_rate])
        if out_mode.control_kind is ControlKind.ACRO:
            return ActuatorCommand(mode=out_mode, t=ref.t, body_rates=rates, thrust=thrust)
        return ActuatorCommand(mode=out_mode, t=ref.t, attitude=q_des, thrust=thrust, yaw=yaw_ref)


class BypassPlugin:
    """Identity plugin: only useful when the platform accepts references directly."""

    NAME = "bypass"

    def __init__(self):
        kinds = [ControlKind.HOVER, ControlKind.POSITION, ControlKind.SPEED, ControlKind.ATTITUDE]
        modes = _enu_modes(kinds) + [ControlMode(ControlKind.ACRO, YawKind.YAW_NONE, FrameKind.BODY_FLU)]
        self.descriptor = ControllerPluginDescriptor(self.NAME, tuple((m, m) for m in modes))

    def reset(self) -> None:
        pass

    def step(
        self, state: KinematicState, ref: MotionReference, out_mode: ControlMode, dt: float
    ) -> ActuatorCommand:
        return passthrough_command(ref)


def passthrough_command(ref: MotionReference) -> ActuatorCommand:
    if ref.mode.control_kind is ControlKind.TRAJECTORY:
        raise NegotiationError("platforms take no trajectory payloads; a plugin must translate")
    return ActuatorCommand(
        mode=ref.mode,
        t=ref.t,
        position=ref.position,
        velocity=ref.velocity,
        attitude=ref.attitude,
        body_rates=ref.body_rates,
        thrust=ref.thrust,
        yaw=ref.yaw,
    )


# --- controller component -----------------------------------------------------


@dataclass
class ControllerConfig:
    plugin: str = "df_tracker"
    rate_hz: float = 100.0
    v_max: float = 3.0
    pid_kp: float = 1.8
    pid_kyaw: float = 1.5
    df_kp: tuple = (4.0, 4.0, 5.0)
    df_kv: tuple = (4.5, 4.5, 5.5)
    df_kr: tuple = (9.0, 9.0, 5.0)


class MotionController:
    """Per-drone controller task: adapt, negotiate, execute, command.

    Publishes `{ns}/actuator_command` and a latched `{ns}/controller/info`
    dict; offers `{ns}/controller/select_plugin` (hover/landed only) and
    `{ns}/controller/check_mode` for behavior activation queries.
    """

    def __init__(
        self,
        bus: MessageBus,
        ns: str,
        tf_tree: TfTree,
        mass: float,
        max_thrust: float,
        config: Optional[ControllerConfig] = None,
        origin: Optional[GeoOrigin] = None,
        control_frame: str = "earth",
    ):
        self.bus = bus
        self.ns = ns
        self.tf = tf_tree
        self.origin = origin
        self.control_frame = control_frame
        self.config = config or ControllerConfig()
        self.plugins = {
            PidCascade.NAME: PidCascade(
                kp=self.config.pid_kp, v_max=self.config.v_max, kyaw=self.config.pid_kyaw
            ),
            DfTracker.NAME: DfTracker(
                mass, max_thrust, kp=self.config.df_kp, kv=self.config.df_kv, kr=self.config.df_kr
            ),
            BypassPlugin.NAME: BypassPlugin(),
        }
        if self.config.plugin not in self.plugins:
            raise ValueError(f"unknown controller plugin '{self.config.plugin}'")
        self.active_plugin = self.config.plugin
        self._dt = 1.0 / self.config.rate_hz
        self._cached: Optional[tuple] = None  # (ref mode, platform modes) -> result
        self._result: Optional[NegotiationResult] = None
        bus.create_topic(f"{ns}/actuator_command", ActuatorCommand, latched=True)
        bus.create_topic(f"{ns}/controller/info", dict, latched=True)
        bus.register_service(f"{ns}/controller/select_plugin", self._srv_select_plugin)
        bus.register_service(f"{ns}/controller/check_mode", self._srv_check_mode)
        bus.add_component(f"{ns}/controller", self._tick, self.config.rate_hz)
        self._publish_info(None, error=None)

    # -- services --

    def _platform_info(self) -> Optional[PlatformInfo]:
        return self.bus.latched_value(f"{self.ns}/platform/info")

    def _srv_select_plugin(self, request) -> dict:
        name = request["name"] if isinstance(request, dict) else str(request)
        if name not in self.plugins:
            return {"ok": False, "reason": f"unknown plugin '{name}'"}
        info = self._platform_info()
        ref = self.bus.latched_value(f"{self.ns}/motion_reference")
        flying = info is not None and info.flight_status.value == "FLYING"
        hovering = ref is not None and ref.mode.control_kind is ControlKind.HOVER
        if flying and not hovering:
            return {"ok": False, "reason": "plugin swap allowed only while hovering or landed"}
        self.active_plugin = name
        self.plugins[name].reset()
        self._cached = None
        self._result = None
        return {"ok": True, "reason": ""}

    def _srv_check_mode(self, request) -> dict:
        mode = ControlMode.from_json(request["mode"]) if isinstance(request, dict) else request
        info = self._platform_info()
        if info is None or not info.supported_modes:
            return {"feasible": False, "reason": "platform modes unknown"}
        try:
            result = negotiate(mode, self.plugins[self.active_plugin].descriptor, info.supported_modes)
        except NegotiationError as e:
            return {"feasible": False, "reason": str(e)}
        return {"feasible": True, "reason": "bypass" if result.bypass else "plugin pair"}

    # -- per-tick pipeline --

    def _tick(self, now: int) -> None:
        ref: Optional[MotionReference] = self.bus.latched_value(f"{self.ns}/motion_reference")
        state: Optional[KinematicState] = self.bus.latched_value(f"{self.ns}/self_localization/pose")
        info = self._platform_info()
        if ref is None or state is None or info is None or not info.supported_modes:
            return
        if now - state.t > STALE_STATE_NS:
            self._publish_info(None, error="stale state estimate; commands suppressed")
            return
        try:
            adapted = adapt_frames(ref, self.control_frame, self.tf, self.origin, at_time=None)
        except (AdaptationError, TfError) as e:
            self._publish_info(None, error=f"frame adaptation failed: {e}")
            return
        cache_key = (adapted.mode, info.supported_modes, self.active_plugin)
        if self._cached != cache_key:
            try:
                self._result = negotiate(
                    adapted.mode, self.plugins[self.active_plugin].descriptor, info.supported_modes
                )
            except NegotiationError as e:
                self._result = None
                self._cached = cache_key
                self._publish_info(None, error=str(e))
                return
            self._cached = cache_key
            self.plugins[self.active_plugin].reset()
            self._publish_info(self._result, error=None)
        if self._result is None:
            return
        if self._result.bypass:
            cmd = passthrough_command(adapted)
        else:
            cmd = self.plugins[self.active_plugin].step(state, adapted, self._result.output_mode, self._dt)
        self.bus.publish(f"{self.ns}/actuator_command", cmd)

    def _publish_info(self, result: Optional[NegotiationResult], error: Optional[str]) -> None:
        payload = {
            "plugin": self.active_plugin,
            "bypass": bool(result.bypass) if result else False,
            "input_mode": result.input_mode.to_json() if result else None,
            "output_mode": result.output_mode.to_json() if result else None,
            "rationale": list(result.rationale) if result else [],
            "error": error,
        }
        self.bus.publish(f"{self.ns}/controller/info", payload)
