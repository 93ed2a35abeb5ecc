"""Simulated aerial platform: the stack's hardware abstraction, backed by
the rigid-body plant.

Each instance owns one drone's flight state machine (connected, armed,
offboard, LANDED/FLYING/EMERGENCY), validates and latches actuator
commands, runs the inner-loop emulation + dynamics at a fixed rate, and
emits sensor streams (true odometry, IMU attitude, noisy mocap, GNSS
fixes).  A 500 ms command watchdog degrades to a zero-speed hold.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import dynamics, quat
from .bus import MessageBus
from .dynamics import InnerLoopGains, MultirotorParams, RigidBodyState
from .geodesy import GeoOrigin, enu_to_geo
from .msgs import (
    ActuatorCommand,
    ControlKind,
    ControlMode,
    FlightStatus,
    FrameKind,
    GeoPoint,
    KinematicState,
    PlatformInfo,
    YawKind,
)

WATCHDOG_NS = 500_000_000  # no command for this long -> hold
AIRBORNE_Z = 1e-3  # m; above this (and clear of the contact clamp) counts as flying


def default_mode_set() -> tuple[ControlMode, ...]:
    """Full capability set: {ACRO, ATTITUDE, SPEED, POSITION} with applicable yaw kinds."""
    enu, flu = FrameKind.LOCAL_ENU, FrameKind.BODY_FLU
    return (
        ControlMode(ControlKind.POSITION, YawKind.YAW_ANGLE, enu),
        ControlMode(ControlKind.POSITION, YawKind.YAW_NONE, enu),
        ControlMode(ControlKind.SPEED, YawKind.YAW_ANGLE, enu),
        ControlMode(ControlKind.SPEED, YawKind.YAW_SPEED, enu),
        ControlMode(ControlKind.SPEED, YawKind.YAW_NONE, enu),
        ControlMode(ControlKind.ATTITUDE, YawKind.YAW_ANGLE, enu),
        ControlMode(ControlKind.ACRO, YawKind.YAW_NONE, flu),
    )


def speed_only_mode_set() -> tuple[ControlMode, ...]:
    """Restricted capability set without outer position loops (heavier airframes)."""
    return tuple(m for m in default_mode_set() if m.control_kind is not ControlKind.POSITION)


@dataclass
class SensorSuiteConfig:
    ground_truth_rate: float = 100.0
    mocap_rate: float = 100.0
    mocap_sigma: float = 0.005
    mocap_dropout: float = 0.0
    gnss_rate: float = 20.0
    gnss_sigma_horizontal: float = 0.2
    gnss_sigma_vertical: float = 0.4
    rng_seed: int = 0

    def check(self) -> None:
        if not (self.ground_truth_rate > 0 and self.mocap_rate > 0 and self.gnss_rate > 0):
            raise ValueError("sensor rates must be positive")
        if min(self.mocap_sigma, self.gnss_sigma_horizontal, self.gnss_sigma_vertical) < 0:
            raise ValueError("sensor sigmas must be non-negative")
        if not 0.0 <= self.mocap_dropout <= 1.0:
            raise ValueError("mocap_dropout must be a probability")


@dataclass
class PlatformConfig:
    ns: str
    preset: str = "nimble"
    params: Optional[MultirotorParams] = None
    gains: Optional[InnerLoopGains] = None
    modes: Optional[tuple[ControlMode, ...]] = None
    sensors: SensorSuiteConfig = field(default_factory=SensorSuiteConfig)
    initial_position: tuple = (0.0, 0.0, 0.0)
    initial_yaw: float = 0.0
    rate_hz: float = 100.0

    def resolved_params(self) -> MultirotorParams:
        return self.params if self.params is not None else dynamics.PRESETS[self.preset]

    def resolved_gains(self) -> InnerLoopGains:
        if self.gains is not None:
            return self.gains
        return dynamics.PRESET_GAINS.get(self.preset, InnerLoopGains())

    def resolved_modes(self) -> tuple[ControlMode, ...]:
        if self.modes is not None:
            return self.modes
        return speed_only_mode_set() if self.preset == "carrier" else default_mode_set()


class SimulatedPlatform:
    """One drone's platform task: FSM + command intake + plant + sensors."""

    def __init__(
        self,
        bus: MessageBus,
        config: PlatformConfig,
        origin: Optional[GeoOrigin] = None,
    ):
        config.sensors.check()
        self.bus = bus
        self.config = config
        self.ns = config.ns
        self.params = config.resolved_params()
        self.params.check()
        self.gains = config.resolved_gains()
        self.modes = config.resolved_modes()
        self.origin = origin
        self.rng = np.random.default_rng(config.sensors.rng_seed)
        p0 = np.asarray(config.initial_position, dtype=float)
        self.state = RigidBodyState(
            p=p0, v=np.zeros(3), q=quat.from_yaw(config.initial_yaw), w=np.zeros(3), thrust_actual=0.0
        )
        self.on_ground = bool(p0[2] <= 0.0)
        self.info = PlatformInfo(
            connected=True,
            armed=False,
            offboard=False,
            flight_status=FlightStatus.LANDED if self.on_ground else FlightStatus.FLYING,
            active_mode=ControlMode(),
            supported_modes=self.modes,
        )
        self._cmd: Optional[ActuatorCommand] = None
        self._cmd_time: Optional[int] = None
        self._watchdog_engaged = False
        self.last_reject: Optional[str] = None
        self._dt = 1.0 / config.rate_hz
        self._divisors = {
            "odom": max(1, round(config.rate_hz / config.sensors.ground_truth_rate)),
            "mocap": max(1, round(config.rate_hz / config.sensors.mocap_rate)),
            "gnss": max(1, round(config.rate_hz / config.sensors.gnss_rate)),
        }
        self._count = 0

        ns = self.ns
        bus.create_topic(f"{ns}/platform/info", PlatformInfo, latched=True)
        bus.create_topic(f"{ns}/sensor/odom", KinematicState, latched=True)
        bus.create_topic(f"{ns}/sensor/imu", KinematicState, latched=True)
        bus.create_topic(f"{ns}/sensor/mocap", KinematicState, latched=True)
        if origin is not None:
            bus.create_topic(f"{ns}/sensor/gps", GeoPoint, latched=True)
        if f"{ns}/actuator_command" not in bus.topic_names():
            bus.create_topic(f"{ns}/actuator_command", ActuatorCommand, latched=True)
        bus.subscribe(f"{ns}/actuator_command", self.apply_command)
        bus.register_service(f"{ns}/platform/arm", self._srv_arm)
        bus.register_service(f"{ns}/platform/offboard", self._srv_offboard)
        bus.register_service(f"{ns}/platform/kill", self._srv_kill)
        bus.register_service(f"{ns}/platform/reset", self._srv_reset)
        bus.add_component(f"{ns}/platform", self._tick, config.rate_hz)
        bus.publish(f"{ns}/platform/info", self.info)

    # -- capability and FSM services --

    def advertise_capabilities(self) -> dict:
        return {"namespace": self.ns, "modes": list(self.modes)}

    def _set_info(self, **changes) -> None:
        new = replace(self.info, **changes)
        if new != self.info:
            self.info = new
            self.bus.publish(f"{self.ns}/platform/info", new)

    def set_arming_state(self, armed: bool) -> tuple[bool, str]:
        if self.info.flight_status is FlightStatus.EMERGENCY:
            return False, "platform in EMERGENCY; reset required"
        if not armed and self.info.flight_status is FlightStatus.FLYING:
            return False, "disarm rejected while FLYING; land or kill"
        self._set_info(armed=armed)
        if not armed:
            self._cmd = None
            self._cmd_time = None
        return True, ""

    def set_offboard(self, enabled: bool) -> tuple[bool, str]:
        if self.info.flight_status is FlightStatus.EMERGENCY:
            return False, "platform in EMERGENCY; reset required"
        if enabled and not self.info.connected:
            return False, "offboard requires a connection"
        self._set_info(offboard=enabled)
        if not enabled:
            self._cmd = None
            self._cmd_time = None
        return True, ""

    def kill(self) -> None:
        """Immediate motor cut; state machine latches EMERGENCY until reset."""
        self.state = replace(self.state, thrust_actual=0.0)
        self._cmd = None
        self._cmd_time = None
        self._set_info(armed=False, offboard=False, flight_status=FlightStatus.EMERGENCY)

    def reset(self) -> tuple[bool, str]:
        if not self.on_ground:
            return False, "reset only on the ground"
        self._set_info(armed=False, offboard=False, flight_status=FlightStatus.LANDED)
        return True, ""

    def _srv_arm(self, request) -> dict:
        value = bool(request["value"]) if isinstance(request, dict) else bool(request)
        ok, reason = self.set_arming_state(value)
        return {"ok": ok, "reason": reason}

    def _srv_offboard(self, request) -> dict:
        value = bool(request["value"]) if isinstance(request, dict) else bool(request)
        ok, reason = self.set_offboard(value)
        return {"ok": ok, "reason": reason}

    def _srv_kill(self, request) -> dict:
        self.kill()
        return {"ok": True, "reason": ""}

    def _srv_reset(self, request) -> dict:
        ok, reason = self.reset()
        return {"ok": ok, "reason": reason}

    # -- command intake --

    def apply_command(self, cmd: ActuatorCommand) -> tuple[bool, str]:
        if self.info.flight_status is FlightStatus.EMERGENCY:
            self.last_reject = "EMERGENCY"
            return False, self.last_reject
        if not (self.info.armed and self.info.offboard):
            self.last_reject = "not armed and offboard"
            return False, self.last_reject
        if cmd.mode not in self.modes:
            self.last_reject = f"mode not advertised: {cmd.mode.control_kind.value}"
            return False, self.last_reject
        self._cmd = cmd
        self._cmd_time = self.bus.now
        self._watchdog_engaged = False
        if self.info.active_mode != cmd.mode:
            self._set_info(active_mode=cmd.mode)
        return True, ""

    # -- plant tick --

    def _effective_command(self, now: int) -> Optional[ActuatorCommand]:
        if not (self.info.armed and self.info.offboard):
            return None
        if self._cmd is None or self._cmd_time is None:
            return None
        if now - self._cmd_time > WATCHDOG_NS:
            if not self._watchdog_engaged:
                self._watchdog_engaged = True
            return ActuatorCommand(
                mode=ControlMode(ControlKind.SPEED, YawKind.YAW_NONE, FrameKind.LOCAL_ENU),
                t=now,
                velocity=np.zeros(3),
            )
        return self._cmd

    def _tick(self, now: int) -> None:
        cmd = self._effective_command(now)
        if cmd is None:
            setpoint = None
        else:
            setpoint = dynamics.resolve_command(cmd, self.state, self.params, self.gains)
        if self.info.flight_status is FlightStatus.EMERGENCY:
            setpoint = None
        new_state = dynamics.step_dynamics(self.state, setpoint, self.params, self._dt)
        new_state, self.on_ground = dynamics.apply_ground_contact(new_state)
        self.state = new_state
        airborne = not self.on_ground and new_state.p[2] > AIRBORNE_Z
        if self.info.flight_status is not FlightStatus.EMERGENCY:
            if airborne and self.info.flight_status is not FlightStatus.FLYING:
                self._set_info(flight_status=FlightStatus.FLYING)
            elif not airborne and self.on_ground and self.info.flight_status is not FlightStatus.LANDED:
                self._set_info(flight_status=FlightStatus.LANDED)
        self._count += 1
        self._emit_sensors(now)

    # -- sensors --

    def _emit_sensors(self, now: int) -> None:
        s = self.state
        if self._count % self._divisors["odom"] == 0:
            self.bus.publish(
                f"{self.ns}/sensor/odom",
                KinematicState("earth", now, s.p.copy(), s.v.copy(), s.q.copy(), s.w.copy()),
            )
            self.bus.publish(
                f"{self.ns}/sensor/imu",
                KinematicState("earth", now, np.zeros(3), np.zeros(3), s.q.copy(), s.w.copy()),
            )
        if self._count % self._divisors["mocap"] == 0:
            # one uniform + one normal triple per slot, dropped or not, keeps the
            # stream aligned so dropout settings never shift later samples
            u = self.rng.uniform()
            noise = self.rng.normal(0.0, 1.0, size=3) * self.config.sensors.mocap_sigma
            if u >= self.config.sensors.mocap_dropout:
                self.bus.publish(
                    f"{self.ns}/sensor/mocap",
                    KinematicState("earth", now, s.p + noise, np.zeros(3), s.q.copy(), np.zeros(3)),
                )
        if self.origin is not None and self._count % self._divisors["gnss"] == 0:
            sig_h = self.config.sensors.gnss_sigma_horizontal
            sig_v = self.config.sensors.gnss_sigma_vertical
            noise = self.rng.normal(0.0, 1.0, size=3) * np.array([sig_h, sig_h, sig_v])
            fix = enu_to_geo(s.p + noise, self.origin)
            self.bus.publish(f"{self.ns}/sensor/gps", fix)
