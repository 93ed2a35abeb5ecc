"""Scenario assembly: one bus, a shared transform tree and geodetic origin,
and the per-drone tasks wired in a fixed order so lockstep runs replay
tick for tick.

Per drone the construction order is platform, estimator, behaviors,
controller.  Within one bus tick that order makes the data flow causal:
the platform integrates the previous actuator command and emits sensors,
the estimator handlers run synchronously inside those publishes, the
behavior servers see the fresh estimate and update the motion reference,
and the controller turns reference plus estimate into the next actuator
command.  A telemetry task registered after all drones snapshots the
end-of-tick state.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import quat
from .bus import DEFAULT_TICK_NS, MessageBus
from .control import ControllerConfig, MotionController
from .estimation import EstimatorConfig, EstimatorManager
from .behaviors import BEHAVIOR_NAMES, BehaviorSet
from .geodesy import GeoOrigin
from .mission import DroneFacade, MissionDocument, MissionRunner
from .msgs import BehaviorStatus, GeoPoint, KinematicState, PlatformInfo, Transform
from .platform_sim import PlatformConfig, SensorSuiteConfig, SimulatedPlatform
from .tf import TfTree

TELEMETRY_TOPIC = "telemetry"


@dataclass
class WorldObject:
    """Static named frame anchored to earth (a gate, a pad, a marker)."""

    name: str
    position: tuple = (0.0, 0.0, 0.0)
    yaw_deg: float = 0.0

    @staticmethod
    def from_json(d: dict) -> "WorldObject":
        return WorldObject(d["name"], tuple(d.get("position", (0.0, 0.0, 0.0))), float(d.get("yaw_deg", 0.0)))


@dataclass
class WorldConfig:
    """Static scene: object frames plus the shared geodetic origin."""

    origin: Optional[GeoPoint] = None
    objects: list[WorldObject] = field(default_factory=list)

    @staticmethod
    def from_json(d: dict) -> "WorldConfig":
        origin = GeoPoint.from_json(d["origin"]) if d.get("origin") else None
        objects = [WorldObject.from_json(o) for o in d.get("objects", [])]
        return WorldConfig(origin=origin, objects=objects)

    @staticmethod
    def from_file(path: str) -> "WorldConfig":
        with open(path) as f:
            return WorldConfig.from_json(json.load(f))


@dataclass
class DroneSpec:
    """Everything needed to assemble one simulated drone."""

    ns: str
    preset: str = "nimble"
    initial_position: tuple = (0.0, 0.0, 0.0)
    initial_yaw: float = 0.0
    estimator: str = "ground_truth"
    estimator_options: dict = field(default_factory=dict)
    controller: str = "df_tracker"
    sensors: SensorSuiteConfig = field(default_factory=SensorSuiteConfig)

    @staticmethod
    def from_json(d: dict) -> "DroneSpec":
        sensors = SensorSuiteConfig(**d.get("sensors", {}))
        return DroneSpec(
            ns=d["ns"],
            preset=d.get("preset", "nimble"),
            initial_position=tuple(d.get("initial_position", (0.0, 0.0, 0.0))),
            initial_yaw=float(d.get("initial_yaw", 0.0)),
            estimator=d.get("estimator", "ground_truth"),
            estimator_options=dict(d.get("estimator_options", {})),
            controller=d.get("controller", "df_tracker"),
            sensors=sensors,
        )


@dataclass
class StackConfig:
    drones: list[DroneSpec]
    world: WorldConfig = field(default_factory=WorldConfig)
    tick_ns: int = DEFAULT_TICK_NS
    rate_hz: float = 100.0
    telemetry_hz: float = 10.0

    @staticmethod
    def from_json(d: dict, base_dir: str = ".") -> "StackConfig":
        world = d.get("world", {})
        if isinstance(world, str):
            world_cfg = WorldConfig.from_file(os.path.join(base_dir, world))
        else:
            world_cfg = WorldConfig.from_json(world)
        return StackConfig(
            drones=[DroneSpec.from_json(s) for s in d["drones"]],
            world=world_cfg,
            tick_ns=int(d.get("tick_ns", DEFAULT_TICK_NS)),
            rate_hz=float(d.get("rate_hz", 100.0)),
            telemetry_hz=float(d.get("telemetry_hz", 10.0)),
        )

    @staticmethod
    def from_file(path: str) -> "StackConfig":
        with open(path) as f:
            return StackConfig.from_json(json.load(f), base_dir=os.path.dirname(os.path.abspath(path)))


class _Drone:
    """Handles to the four tasks of one assembled drone."""

    def __init__(self, spec, platform, estimator, behaviors, controller):
        self.spec = spec
        self.platform = platform
        self.estimator = estimator
        self.behaviors = behaviors
        self.controller = controller


class SwarmStack:
    """A full multi-drone session over one bus."""

    def __init__(self, config: StackConfig, bus: Optional[MessageBus] = None):
        self.config = config
        self.bus = bus if bus is not None else MessageBus(tick_ns=config.tick_ns)
        self.tf = TfTree("earth")
        self.origin: Optional[GeoOrigin] = None
        if config.world.origin is not None:
            self.origin = GeoOrigin().set(config.world.origin)
        if "tf" not in self.bus.topic_names():
            self.bus.create_topic("tf", Transform, latched=False)
        for obj in config.world.objects:
            tr = Transform(
                "earth",
                obj.name,
                np.asarray(obj.position, dtype=float),
                quat.from_yaw(np.deg2rad(obj.yaw_deg)),
                self.bus.now,
            )
            self.tf.set_transform(tr, static=True)
            self.bus.publish("tf", tr)

        self.drones: dict[str, _Drone] = {}
        for spec in config.drones:
            if spec.ns in self.drones:
                raise ValueError(f"duplicate drone namespace '{spec.ns}'")
            platform = SimulatedPlatform(
                self.bus,
                PlatformConfig(
                    ns=spec.ns,
                    preset=spec.preset,
                    sensors=spec.sensors,
                    initial_position=spec.initial_position,
                    initial_yaw=spec.initial_yaw,
                    rate_hz=config.rate_hz,
                ),
                origin=self.origin,
            )
            estimator = EstimatorManager(
                self.bus,
                spec.ns,
                self.tf,
                origin=self.origin,
                config=EstimatorConfig(plugin=spec.estimator, **spec.estimator_options),
            )
            behaviors = BehaviorSet(self.bus, spec.ns, self.tf, rate_hz=config.rate_hz, origin=self.origin)
            controller = MotionController(
                self.bus,
                spec.ns,
                self.tf,
                platform.params.mass,
                platform.params.max_thrust,
                config=ControllerConfig(plugin=spec.controller, rate_hz=config.rate_hz),
                origin=self.origin,
            )
            self.drones[spec.ns] = _Drone(spec, platform, estimator, behaviors, controller)

        self.missions: dict[str, MissionRunner] = {}
        self.telemetry_log: list[str] = []
        self.bus.create_topic(TELEMETRY_TOPIC, dict, latched=True)
        self.bus.add_component(TELEMETRY_TOPIC, self._telemetry_tick, config.telemetry_hz)

        # Warm-up: run until every estimator has produced a first estimate so
        # goals sent right away are not refused for want of one.  Bounded by
        # one simulated second; slower sensor suites than that are misconfigured.
        def _all_estimating() -> bool:
            return all(
                self.bus.latched_value(f"{ns}/self_localization/pose") is not None for ns in self.drones
            )

        if not self.bus.run_until(_all_estimating, timeout_s=1.0):
            raise RuntimeError("state estimation produced no estimate within 1 s of start")
        # Latch one frame immediately so telemetry consumers joining before the
        # first scheduled publish still get a seed snapshot.
        self._telemetry_tick(self.bus.now)

    # -- drone access --------------------------------------------------------

    @property
    def drone_names(self) -> list[str]:
        return list(self.drones)

    def facade(self, ns: str, timeout_s: float = 300.0) -> DroneFacade:
        if ns not in self.drones:
            raise KeyError(f"unknown drone '{ns}'")
        return DroneFacade(self.bus, ns, timeout_s=timeout_s)

    def true_state(self, ns: str) -> Optional[KinematicState]:
        """Latest ground-truth odometry sample (a sim sensor, not the estimate)."""
        return self.bus.latched_value(f"{ns}/sensor/odom")

    # -- missions ------------------------------------------------------------

    def add_mission(self, doc: MissionDocument, label: Optional[str] = None) -> MissionRunner:
        if label is None:
            label = f"mission{len(self.missions) + 1}"
        if label in self.missions:
            raise ValueError(f"mission label '{label}' already in use")
        unknown = [ns for ns in doc.drones if ns not in self.drones]
        if unknown:
            raise ValueError(f"mission names unknown drones: {unknown}")
        runner = MissionRunner(self.bus, doc, label=label)
        self.missions[label] = runner
        return runner

    def current_mission_item(self, ns: str) -> Optional[str]:
        for runner in reversed(list(self.missions.values())):
            prog = runner.programs.get(ns)
            if prog is None or runner.state not in ("RUNNING", "PAUSED"):
                continue
            item = prog.current()
            if item is not None and not prog.terminal:
                return item.id
        return None

    # -- telemetry -----------------------------------------------------------

    def telemetry_frame(self, now: int) -> dict:
        drones = {}
        for ns in self.drones:
            pose: Optional[KinematicState] = self.bus.latched_value(f"{ns}/self_localization/pose")
            info: Optional[PlatformInfo] = self.bus.latched_value(f"{ns}/platform/info")
            statuses = {}
            for name in BEHAVIOR_NAMES:
                st: Optional[BehaviorStatus] = self.bus.latched_value(f"{ns}/behavior/{name}/status")
                if st is not None:
                    statuses[name] = st.to_json()
            drones[ns] = {
                "ns": ns,
                "pose": pose.to_json() if pose is not None else None,
                "platform": info.to_json() if info is not None else None,
                "behaviors": statuses,
                "mission_item": self.current_mission_item(ns),
            }
        return {"t": now, "drones": drones}

    def _telemetry_tick(self, now: int) -> None:
        frame = self.telemetry_frame(now)
        self.bus.publish(TELEMETRY_TOPIC, frame)
        self.telemetry_log.append(json.dumps(frame, sort_keys=True, separators=(",", ":")))

    def telemetry_hash(self) -> str:
        digest = hashlib.sha256()
        for line in self.telemetry_log:
            digest.update(line.encode())
            digest.update(b"\n")
        return digest.hexdigest()

    def dump_telemetry(self, path: str) -> None:
        with open(path, "w") as f:
            for line in self.telemetry_log:
                f.write(line + "\n")
