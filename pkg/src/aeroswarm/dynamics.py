"""Simulated multirotor plant: rigid body + first-order thrust lag.

The plant integrates, with fixed-step RK4:

    p_dot = v
    v_dot = (T R e3)/m - g e3 - (c/m) v
    q_dot = 0.5 q (x) [0, w]
    w_dot = I^-1 (tau - w x I w)
    T_dot = (T_cmd - T)/tau_m

An onboard-autopilot emulation cascades accepted command modes down to
(body-rate setpoint, collective thrust): POSITION -> SPEED (P),
SPEED -> desired attitude + thrust (P with tilt clamp), ATTITUDE ->
rates (P on the attitude error rotation vector), ACRO passes through.
The rate loop applies tau = I * kw (w_cmd - w) + w x I w, so commanded
rate errors decay first-order; with no rate command the body rotates
torque-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import quat
from .msgs import GRAVITY, ActuatorCommand, ControlKind, YawKind

E3 = np.array([0.0, 0.0, 1.0])

MAX_DT = 0.010  # s; RK4 accuracy bound for the stiffest preset


@dataclass(frozen=True)
class MultirotorParams:
    mass: float  # kg
    inertia: np.ndarray  # diagonal, kg m^2
    max_thrust: float  # N
    max_tilt: float  # rad
    drag_coeff: float  # N s/m, linear
    motor_tau: float  # s
    rate_limits: np.ndarray  # rad/s per body axis

    def __post_init__(self):
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float))
        object.__setattr__(self, "rate_limits", np.asarray(self.rate_limits, dtype=float))

    def check(self) -> None:
        if not (
            self.mass > 0
            and np.all(self.inertia > 0)
            and self.max_thrust > 0
            and self.max_tilt > 0
            and self.drag_coeff >= 0
            and self.motor_tau > 0
            and np.all(self.rate_limits > 0)
        ):
            raise ValueError("multirotor parameters must be strictly positive")
        if self.max_thrust <= self.mass * GRAVITY:
            raise ValueError("max_thrust must exceed weight")


@dataclass(frozen=True)
class InnerLoopGains:
    """Autopilot emulation gains; acceleration-space, so presets share most values."""

    kp_pos: float = 1.6
    v_max: float = 3.0
    kv_vel: float = 3.5
    katt: np.ndarray = field(default_factory=lambda: np.array([10.0, 10.0, 4.0]))
    kw: np.ndarray = field(default_factory=lambda: np.array([25.0, 25.0, 12.0]))

    def __post_init__(self):
        object.__setattr__(self, "katt", np.asarray(self.katt, dtype=float))
        object.__setattr__(self, "kw", np.asarray(self.kw, dtype=float))


@dataclass(frozen=True)
class RigidBodyState:
    p: np.ndarray
    v: np.ndarray
    q: np.ndarray  # unit quaternion, world <- body
    w: np.ndarray  # rad/s, body frame
    thrust_actual: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))

    @staticmethod
    def at_rest(p) -> "RigidBodyState":
        return RigidBodyState(np.asarray(p, dtype=float), np.zeros(3), quat.IDENTITY.copy(), np.zeros(3), 0.0)


@dataclass(frozen=True)
class RateThrustSetpoint:
    """Innermost setpoint: body rates (None = torque-free) + collective thrust in N."""

    w_cmd: Optional[np.ndarray]
    thrust_cmd: float
    kw: np.ndarray = field(default_factory=lambda: InnerLoopGains().kw)


def _pack(s: RigidBodyState) -> np.ndarray:
    out = np.empty(14)
    out[0:3] = s.p
    out[3:6] = s.v
    out[6:10] = s.q
    out[10:13] = s.w
    out[13] = s.thrust_actual
    return out


def _unpack(x: np.ndarray) -> RigidBodyState:
    return RigidBodyState(x[0:3].copy(), x[3:6].copy(), x[6:10].copy(), x[10:13].copy(), float(x[13]))


def _deriv(x: np.ndarray, sp: RateThrustSetpoint, params: MultirotorParams) -> np.ndarray:
    m = params.mass
    v = x[3:6]
    q = x[6:10]
    w = x[10:13]
    thrust = x[13]
    out = np.empty(14)
    out[0:3] = v
    out[3:6] = (thrust / m) * quat.rotate(q, E3) - GRAVITY * E3 - (params.drag_coeff / m) * v
    out[6:10] = quat.derivative(q, w)
    inertia = params.inertia
    if sp.w_cmd is None:
        out[10:13] = -np.cross(w, inertia * w) / inertia
    else:
        # tau = I kw (w_cmd - w) + w x I w  =>  w_dot = kw (w_cmd - w)
        out[10:13] = sp.kw * (sp.w_cmd - w)
    out[13] = (sp.thrust_cmd - thrust) / params.motor_tau
    return out


def step_dynamics(
    s: RigidBodyState,
    setpoint: Optional[RateThrustSetpoint],
    params: MultirotorParams,
    dt: float,
) -> RigidBodyState:
    """One RK4 step of the plant under a held rate/thrust setpoint.

    ``setpoint=None`` means unpowered, torque-free flight.  Rate commands
    are clamped to the airframe limits and thrust commands to
    [0, max_thrust] before integrating.
    """
    if not (0.0 < dt <= MAX_DT + 1e-12):
        raise ValueError("dt must be in (0, 10 ms]")
    x0 = _pack(s)
    if not np.all(np.isfinite(x0)):
        raise ValueError("non-finite state")
    if setpoint is None:
        sp = RateThrustSetpoint(None, 0.0)
    else:
        w_cmd = setpoint.w_cmd
        if w_cmd is not None:
            w_cmd = np.clip(w_cmd, -params.rate_limits, params.rate_limits)
        sp = RateThrustSetpoint(
            w_cmd, float(np.clip(setpoint.thrust_cmd, 0.0, params.max_thrust)), setpoint.kw
        )
    k1 = _deriv(x0, sp, params)
    k2 = _deriv(x0 + 0.5 * dt * k1, sp, params)
    k3 = _deriv(x0 + 0.5 * dt * k2, sp, params)
    k4 = _deriv(x0 + dt * k3, sp, params)
    x1 = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    x1[6:10] = quat.normalize(x1[6:10])
    x1[13] = min(max(x1[13], 0.0), params.max_thrust)
    return _unpack(x1)


def resolve_command(
    cmd: ActuatorCommand,
    s: RigidBodyState,
    params: MultirotorParams,
    gains: InnerLoopGains,
) -> RateThrustSetpoint:
    """Cascade one accepted platform command down to rates + thrust."""
    kind = cmd.mode.control_kind
    yaw_sp: Optional[float] = None
    yaw_rate_sp = 0.0
    if cmd.mode.yaw_kind is YawKind.YAW_ANGLE and cmd.yaw is not None:
        yaw_sp = cmd.yaw
    elif cmd.mode.yaw_kind is YawKind.YAW_SPEED and cmd.yaw is not None:
        yaw_rate_sp = cmd.yaw

    if kind is ControlKind.ACRO:
        return RateThrustSetpoint(np.asarray(cmd.body_rates, dtype=float), float(cmd.thrust), gains.kw)

    if kind is ControlKind.ATTITUDE:
        w_cmd = _attitude_rates(s.q, np.asarray(cmd.attitude, dtype=float), gains)
        w_cmd[2] += yaw_rate_sp
        return RateThrustSetpoint(w_cmd, float(cmd.thrust), gains.kw)

    if kind in (ControlKind.POSITION, ControlKind.HOVER):
        target = s.p if kind is ControlKind.HOVER else np.asarray(cmd.position, dtype=float)
        v_sp = gains.kp_pos * (target - s.p)
        n = float(np.linalg.norm(v_sp))
        if n > gains.v_max:
            v_sp *= gains.v_max / n
    elif kind is ControlKind.SPEED:
        v_sp = np.asarray(cmd.velocity, dtype=float)
    else:
        raise ValueError(f"platform cannot emulate mode {kind}")

    a_des = gains.kv_vel * (v_sp - s.v)
    f_world = params.mass * (a_des + GRAVITY * E3)
    f_world = _tilt_clamp(f_world, params.max_tilt)
    thrust_cmd = float(np.linalg.norm(f_world))
    if thrust_cmd < 1e-9:
        return RateThrustSetpoint(np.zeros(3), 0.0, gains.kw)
    z_des = f_world / thrust_cmd
    yaw = yaw_sp if yaw_sp is not None else quat.yaw_of(s.q)
    q_des = quat.from_z_yaw(z_des, yaw)
    w_cmd = _attitude_rates(s.q, q_des, gains)
    w_cmd[2] += yaw_rate_sp
    return RateThrustSetpoint(w_cmd, min(thrust_cmd, params.max_thrust), gains.kw)


def _tilt_clamp(f_world: np.ndarray, max_tilt: float) -> np.ndarray:
    fz = f_world[2]
    if fz <= 0.0:
        # never command a downward collective; degrade to vertical-only thrust
        return np.array([0.0, 0.0, max(fz, 0.0)])
    fh = math.hypot(f_world[0], f_world[1])
    limit = fz * math.tan(max_tilt)
    if fh > limit:
        scale = limit / fh
        return np.array([f_world[0] * scale, f_world[1] * scale, fz])
    return f_world


def _attitude_rates(q: np.ndarray, q_des: np.ndarray, gains: InnerLoopGains) -> np.ndarray:
    err = quat.multiply(quat.conjugate(q), q_des)
    return gains.katt * quat.to_rotvec(err)


def apply_ground_contact(s: RigidBodyState) -> tuple[RigidBodyState, bool]:
    """Clamp the state to the z=0 ground plane; returns (state, on_ground)."""
    if s.p[2] > 0.0:
        return s, False
    p = s.p.copy()
    p[2] = 0.0
    v = s.v.copy()
    if v[2] < 0.0:
        v[:] = 0.0  # touchdown kills residual motion (skid friction)
    # settle upright, preserving heading
    q_level = quat.from_yaw(quat.yaw_of(s.q))
    return replace(s, p=p, v=v, q=q_level, w=np.zeros(3)), True


PRESETS: dict[str, MultirotorParams] = {
    "nimble": MultirotorParams(
        mass=0.09,
        inertia=np.array([1.4e-4, 1.4e-4, 2.2e-4]),
        max_thrust=2.2,
        max_tilt=math.radians(35.0),
        drag_coeff=0.02,
        motor_tau=0.04,
        rate_limits=np.array([8.0, 8.0, 4.0]),
    ),
    "carrier": MultirotorParams(
        mass=1.4,
        inertia=np.array([0.025, 0.025, 0.045]),
        max_thrust=36.0,
        max_tilt=math.radians(30.0),
        drag_coeff=0.12,
        motor_tau=0.09,
        rate_limits=np.array([5.0, 5.0, 2.5]),
    ),
}

PRESET_GAINS: dict[str, InnerLoopGains] = {
    "nimble": InnerLoopGains(kp_pos=1.6, v_max=3.0, kv_vel=3.5),
    "carrier": InnerLoopGains(kp_pos=1.4, v_max=8.0, kv_vel=3.0),
}
