"""State estimation layer: swappable sensor-fusion plugins + TF publication.

Every plugin consumes raw sensor topics and produces the same outputs:
a latched `{ns}/self_localization/pose` KinematicState in the earth
frame and the TF chain earth -> ns/map -> ns/odom -> ns/base_link
(map and odom are identity here; no drift modeling).  Upper layers are
agnostic to which plugin is active.

Plugins:
  ground_truth  passthrough of the simulator's true odometry
  mocap         low-pass position/orientation filter with an outlier
                jump gate; velocity from filtered finite differences
  gps           geodetic fixes mapped through the shared origin;
                velocity from a sliding least-squares fit over recent
                fixes; attitude taken from the IMU stream
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import quat
from .bus import MessageBus
from .geodesy import GeoOrigin, geo_to_enu
from .msgs import BehaviorState, BehaviorStatus, GeoPoint, KinematicState, Transform
from .tf import TfTree

STALE_SENSOR_NS = 200_000_000


@dataclass
class EstimatorConfig:
    plugin: str = "ground_truth"
    mocap_alpha: float = 0.9  # weight kept on the previous filtered value
    mocap_jump_gate_m: float = 1.0
    gps_velocity_window_s: float = 1.0


@dataclass(frozen=True)
class EstimatorPluginDescriptor:
    name: str
    consumed_topics: tuple[str, ...]
    published_frames: tuple[str, ...]


class GroundTruthEstimator:
    name = "ground_truth"

    def __init__(self, ns: str, config: EstimatorConfig):
        self.ns = ns

    def consumed(self) -> tuple[str, ...]:
        return (f"{self.ns}/sensor/odom",)

    def reset(self) -> None:
        pass

    def update(self, topic: str, msg, now: int) -> Optional[KinematicState]:
        return msg


class MocapEstimator:
    name = "mocap"

    def __init__(self, ns: str, config: EstimatorConfig):
        self.ns = ns
        self.alpha = config.mocap_alpha
        self.jump_gate = config.mocap_jump_gate_m
        self.reset()

    def consumed(self) -> tuple[str, ...]:
        return (f"{self.ns}/sensor/mocap",)

    def reset(self) -> None:
        self._p: Optional[np.ndarray] = None
        self._v = np.zeros(3)
        self._q: Optional[np.ndarray] = None
        self._w = np.zeros(3)
        self._last_raw: Optional[np.ndarray] = None
        self._last_t: Optional[int] = None

    def update(self, topic: str, msg: KinematicState, now: int) -> Optional[KinematicState]:
        p_raw = msg.position
        if self._last_raw is not None and float(np.linalg.norm(p_raw - self._last_raw)) > self.jump_gate:
            return None  # outlier sample rejected; estimate holds
        dt = None if self._last_t is None else (msg.t - self._last_t) * 1e-9
        self._last_raw = p_raw.copy()
        self._last_t = msg.t
        if self._p is None:
            self._p = p_raw.copy()
            self._q = msg.orientation.copy()
        else:
            a = self.alpha
            p_prev = self._p
            self._p = a * self._p + (1.0 - a) * p_raw
            q_prev = self._q
            self._q = quat.normalize(quat.slerp(self._q, msg.orientation, 1.0 - a))
            if dt and dt > 0.0:
                v_raw = (self._p - p_prev) / dt
                self._v = a * self._v + (1.0 - a) * v_raw
                w_raw = quat.to_rotvec(quat.multiply(quat.conjugate(q_prev), self._q)) / dt
                self._w = a * self._w + (1.0 - a) * w_raw
        return KinematicState(
            frame_id="earth",
            t=msg.t,
            position=self._p.copy(),
            velocity=self._v.copy(),
            orientation=self._q.copy(),
            angular_velocity=self._w.copy(),
        )


class GpsEstimator:
    name = "gps"

    def __init__(self, ns: str, config: EstimatorConfig, origin: GeoOrigin):
        self.ns = ns
        self.origin = origin
        self.window_ns = int(config.gps_velocity_window_s * 1e9)
        self.reset()

    def consumed(self) -> tuple[str, ...]:
        return (f"{self.ns}/sensor/gps", f"{self.ns}/sensor/imu")

    def reset(self) -> None:
        self._fixes: deque[tuple[int, np.ndarray]] = deque()
        self._p: Optional[np.ndarray] = None
        self._v = np.zeros(3)
        self._q = quat.IDENTITY.copy()
        self._w = np.zeros(3)

    def _fit_velocity(self) -> np.ndarray:
        if len(self._fixes) < 2:
            return np.zeros(3)
        ts = np.array([t for t, _ in self._fixes], dtype=float) * 1e-9
        ps = np.vstack([p for _, p in self._fixes])
        ts = ts - ts.mean()
        denom = float(ts @ ts)
        if denom < 1e-12:
            return np.zeros(3)
        return (ts @ (ps - ps.mean(axis=0))) / denom

    def update(self, topic: str, msg, now: int) -> Optional[KinematicState]:
        if topic.endswith("/gps"):
            if not isinstance(msg, GeoPoint):
                return None
            enu = geo_to_enu(msg, self.origin)
            self._fixes.append((now, enu))
            while self._fixes and now - self._fixes[0][0] > self.window_ns:
                self._fixes.popleft()
            self._p = enu
            self._v = self._fit_velocity()
            return None  # full state goes out on the next IMU sample
        # IMU stream: orientation + body rates at control rate
        self._q = msg.orientation.copy()
        self._w = msg.angular_velocity.copy()
        if self._p is None:
            return None
        return KinematicState(
            frame_id="earth",
            t=now,
            position=self._p.copy(),
            velocity=self._v.copy(),
            orientation=self._q.copy(),
            angular_velocity=self._w.copy(),
        )


class EstimatorManager:
    """Owns the per-drone plugin set; exactly one plugin active at a time.

    Publishes `{ns}/self_localization/pose` plus TF, and offers
    `{ns}/estimator/select` (refused while any behavior is RUNNING).
    """

    PLUGINS = ("ground_truth", "mocap", "gps")

    def __init__(
        self,
        bus: MessageBus,
        ns: str,
        tf_tree: TfTree,
        origin: Optional[GeoOrigin] = None,
        config: Optional[EstimatorConfig] = None,
    ):
        self.bus = bus
        self.ns = ns
        self.tf = tf_tree
        self.origin = origin
        self.config = config or EstimatorConfig()
        self._plugins = {
            "ground_truth": GroundTruthEstimator(ns, self.config),
            "mocap": MocapEstimator(ns, self.config),
        }
        if origin is not None:
            self._plugins["gps"] = GpsEstimator(ns, self.config, origin)
        if self.config.plugin not in self._plugins:
            raise ValueError(f"unknown or unavailable estimator plugin '{self.config.plugin}'")
        self.active = self.config.plugin
        bus.create_topic(f"{ns}/self_localization/pose", KinematicState, latched=True)
        if "tf" not in bus.topic_names():
            bus.create_topic("tf", Transform, latched=False)
        for topic in sorted({t for p in self._plugins.values() for t in p.consumed()}):
            bus.subscribe(topic, self._make_handler(topic))
        bus.register_service(f"{ns}/estimator/select", self._srv_select)
        self._publish_static_frames()

    def descriptor(self) -> EstimatorPluginDescriptor:
        plugin = self._plugins[self.active]
        return EstimatorPluginDescriptor(
            name=self.active,
            consumed_topics=plugin.consumed(),
            published_frames=("earth", f"{self.ns}/map", f"{self.ns}/odom", f"{self.ns}/base_link"),
        )

    def _publish_static_frames(self) -> None:
        t = self.bus.now
        ident = quat.IDENTITY.copy()
        for parent, child in (("earth", f"{self.ns}/map"), (f"{self.ns}/map", f"{self.ns}/odom")):
            tr = Transform(parent, child, np.zeros(3), ident, t)
            self.tf.set_transform(tr, static=True)
            self.bus.publish("tf", tr)

    def _make_handler(self, topic: str):
        def handler(msg):
            self._on_sensor(topic, msg)

        return handler

    def _on_sensor(self, topic: str, msg) -> None:
        plugin = self._plugins[self.active]
        if topic not in plugin.consumed():
            return
        est = plugin.update(topic, msg, self.bus.now)
        if est is None:
            return
        self.bus.publish(f"{self.ns}/self_localization/pose", est)
        tr = Transform(f"{self.ns}/odom", f"{self.ns}/base_link", est.position, est.orientation, est.t)
        self.tf.set_transform(tr)
        self.bus.publish("tf", tr)

    def _behavior_running(self) -> bool:
        prefix = f"{self.ns}/behavior/"
        for name in self.bus.topic_names():
            if name.startswith(prefix) and name.endswith("/status"):
                status: Optional[BehaviorStatus] = self.bus.latched_value(name)
                if status is not None and status.state is BehaviorState.RUNNING:
                    return True
        return False

    def _srv_select(self, request) -> dict:
        name = request["name"] if isinstance(request, dict) else str(request)
        if name not in self._plugins:
            return {"ok": False, "reason": f"unknown estimator plugin '{name}'"}
        if self._behavior_running():
            return {"ok": False, "reason": "estimator switch refused while a behavior is active"}
        if name != self.active:
            self._plugins[self.active].reset()
            self.active = name
            self._plugins[name].reset()
            self._publish_static_frames()
        return {"ok": True, "reason": ""}


def fit_window_velocity(stamps_s: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Least-squares velocity over a window of timestamped positions (shared oracle hook)."""
    ts = np.asarray(stamps_s, dtype=float)
    ps = np.asarray(positions, dtype=float)
    ts = ts - ts.mean()
    denom = float(ts @ ts)
    if denom < 1e-12:
        return np.zeros(3)
    return (ts @ (ps - ps.mean(axis=0))) / denom
