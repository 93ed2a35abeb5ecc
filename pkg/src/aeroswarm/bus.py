"""In-process typed message bus: topics, services, action channels.

All components of every drone share one bus instance, namespaced by
topic prefixes.  Two clock modes exist: LOCKSTEP (time advances only
through explicit step() calls, single-threaded, fully deterministic)
and REALTIME (a pacer thread steps the same fixed tick at wall-clock
rate; bus entry points are serialized by a lock so interactive clients
may call in from other threads).
"""

from __future__ import annotations

import enum
import json
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from . import msgs

NS_PER_SEC = 1_000_000_000
DEFAULT_TICK_NS = 10_000_000  # 10 ms
DEFAULT_SERVICE_TIMEOUT_NS = 1 * NS_PER_SEC


class BusError(Exception):
    pass


class UnknownTopic(BusError):
    pass


class PayloadKindMismatch(BusError):
    pass


class UnknownService(BusError):
    pass


class ServiceTimeout(BusError):
    pass


class ActionBusy(BusError):
    pass


class ActionRejected(BusError):
    pass


class ClockModeError(BusError):
    pass


class ClockMode(enum.Enum):
    LOCKSTEP = "lockstep"
    REALTIME = "realtime"


class ResultKind(enum.Enum):
    SUCCESS = "SUCCESS"
    FAILURE = "FAILURE"


@dataclass
class VirtualClock:
    tick_ns: int = DEFAULT_TICK_NS
    now: int = 0
    tick_index: int = 0


@dataclass(frozen=True)
class TopicDescriptor:
    name: str
    payload_kind: type
    latched: bool = False


@dataclass
class ActionResult:
    kind: ResultKind
    payload: dict = field(default_factory=dict)
    reason: str = ""


class GoalHandle:
    """Caller-side view of one accepted goal."""

    def __init__(self, channel: "_ActionChannel", goal: Any, t_ns: int):
        self.channel_name = channel.name
        self.goal = goal
        self.sent_at = t_ns
        self.feedback: list[Any] = []
        self.result: Optional[ActionResult] = None
        self.on_feedback: Optional[Callable[[Any], None]] = None
        self.on_result: Optional[Callable[[ActionResult], None]] = None
        self._channel = channel

    @property
    def done(self) -> bool:
        return self.result is not None

    def cancel(self, reason: str = "canceled") -> None:
        self._channel.request_cancel(self, reason)


class _ActionChannel:
    def __init__(self, bus: "MessageBus", name: str):
        self.bus = bus
        self.name = name
        self.on_goal: Optional[Callable[[Any, GoalHandle], tuple[bool, str]]] = None
        self.on_cancel: Optional[Callable[[GoalHandle, str], None]] = None
        self.active: Optional[GoalHandle] = None

    def send_goal(self, goal: Any) -> GoalHandle:
        if self.on_goal is None:
            raise UnknownService(f"no action server on {self.name!r}")
        if self.active is not None:
            raise ActionBusy(f"action {self.name!r} already has an active goal")
        handle = GoalHandle(self, goal, self.bus.now)
        self.bus._log("action", f"{self.name}/goal", goal)
        accepted, reason = self.on_goal(goal, handle)
        if not accepted:
            self.bus._log("action", f"{self.name}/rejected", {"reason": reason})
            raise ActionRejected(f"{self.name}: {reason}")
        self.active = handle
        return handle

    def publish_feedback(self, handle: GoalHandle, payload: Any) -> None:
        if self.active is not handle:
            raise BusError(f"feedback outside active goal on {self.name!r}")
        handle.feedback.append(payload)
        self.bus._log("action", f"{self.name}/feedback", payload)
        if handle.on_feedback:
            handle.on_feedback(payload)

    def finish(self, handle: GoalHandle, result: ActionResult) -> None:
        if self.active is not handle:
            raise BusError(f"result for non-active goal on {self.name!r}")
        self.active = None
        handle.result = result
        self.bus._log(
            "action",
            f"{self.name}/result",
            {"kind": result.kind.value, "reason": result.reason, "payload": result.payload},
        )
        if handle.on_result:
            handle.on_result(result)

    def request_cancel(self, handle: GoalHandle, reason: str) -> None:
        if handle.result is not None or self.active is not handle:
            return
        if self.on_cancel is not None:
            self.on_cancel(handle, reason)
        if self.active is handle and handle.result is None:
            # server did not conclude synchronously; force a failure result
            self.finish(handle, ActionResult(ResultKind.FAILURE, {}, reason))


class ServerGoal:
    """Server-side helper pairing a goal handle with its channel."""

    def __init__(self, channel: _ActionChannel, handle: GoalHandle):
        self._channel = channel
        self.handle = handle
        self.goal = handle.goal

    def publish_feedback(self, payload: Any) -> None:
        self._channel.publish_feedback(self.handle, payload)

    def succeed(self, payload: Optional[dict] = None) -> None:
        self._channel.finish(self.handle, ActionResult(ResultKind.SUCCESS, payload or {}))

    def abort(self, reason: str, payload: Optional[dict] = None) -> None:
        self._channel.finish(self.handle, ActionResult(ResultKind.FAILURE, payload or {}, reason))

    @property
    def active(self) -> bool:
        return self.handle.result is None


@dataclass
class _Component:
    name: str
    fn: Callable[[int], None]
    divisor: int
    runs: int = 0


class MessageBus:
    def __init__(
        self,
        tick_ns: int = DEFAULT_TICK_NS,
        mode: ClockMode = ClockMode.LOCKSTEP,
        record_log: bool = False,
        service_timeout_ns: int = DEFAULT_SERVICE_TIMEOUT_NS,
    ):
        self.clock = VirtualClock(tick_ns=tick_ns)
        self.mode = mode
        self.record_log = record_log
        self.service_timeout_ns = service_timeout_ns
        self.lock = threading.RLock()
        self._topics: dict[str, TopicDescriptor] = {}
        self._subscribers: dict[str, list[Callable[[Any], None]]] = {}
        self._latched: dict[str, Any] = {}
        self._services: dict[str, Callable[[Any], Any]] = {}
        self._actions: dict[str, _ActionChannel] = {}
        self._components: list[_Component] = []
        self._log_records: list[str] = []
        self._pacer: Optional[threading.Thread] = None
        self._pacer_stop = threading.Event()
        self._step_cv = threading.Condition(self.lock)

    # --- time -----------------------------------------------------------

    @property
    def now(self) -> int:
        return self.clock.now

    @property
    def tick_ns(self) -> int:
        return self.clock.tick_ns

    def seconds(self, s: float) -> int:
        return int(round(s * NS_PER_SEC))

    # --- topics -----------------------------------------------------------

    def create_topic(self, name: str, payload_kind: type, latched: bool = False) -> TopicDescriptor:
        with self.lock:
            if name in self._topics:
                existing = self._topics[name]
                if existing.payload_kind is not payload_kind or existing.latched != latched:
                    raise BusError(f"topic {name!r} already registered with a different shape")
                return existing
            desc = TopicDescriptor(name, payload_kind, latched)
            self._topics[name] = desc
            self._subscribers[name] = []
            return desc

    def subscribe(self, name: str, callback: Callable[[Any], None]) -> None:
        with self.lock:
            if name not in self._topics:
                raise UnknownTopic(name)
            self._subscribers[name].append(callback)
            if self._topics[name].latched and name in self._latched:
                callback(self._latched[name])

    def publish(self, name: str, msg: Any) -> int:
        with self.lock:
            desc = self._topics.get(name)
            if desc is None:
                raise UnknownTopic(name)
            if not isinstance(msg, desc.payload_kind):
                raise PayloadKindMismatch(
                    f"topic {name!r} expects {desc.payload_kind.__name__}, got {type(msg).__name__}"
                )
            if desc.latched:
                self._latched[name] = msg
            self._log("topic", name, msg)
            subs = list(self._subscribers[name])
            for cb in subs:
                cb(msg)
            return len(subs)

    def latched_value(self, name: str) -> Any:
        with self.lock:
            if name not in self._topics:
                raise UnknownTopic(name)
            return self._latched.get(name)

    def topic_names(self) -> list[str]:
        with self.lock:
            return sorted(self._topics)

    # --- services ---------------------------------------------------------

    def register_service(self, name: str, handler: Callable[[Any], Any]) -> None:
        with self.lock:
            if name in self._services:
                raise BusError(f"service {name!r} already registered")
            self._services[name] = handler

    def has_service(self, name: str) -> bool:
        with self.lock:
            return name in self._services

    def call(self, name: str, request: Any = None, timeout_ns: Optional[int] = None) -> Any:
        with self.lock:
            handler = self._services.get(name)
            if handler is None:
                raise UnknownService(name)
            self._log("service", f"{name}/request", request)
            reply = handler(request)
            self._log("service", f"{name}/reply", reply)
            return reply

    # --- actions ----------------------------------------------------------

    def create_action(self, name: str) -> None:
        with self.lock:
            if name in self._actions:
                raise BusError(f"action {name!r} already registered")
            self._actions[name] = _ActionChannel(self, name)

    def set_action_server(
        self,
        name: str,
        on_goal: Callable[[Any, GoalHandle], tuple[bool, str]],
        on_cancel: Optional[Callable[[GoalHandle, str], None]] = None,
    ) -> None:
        with self.lock:
            if name not in self._actions:
                self.create_action(name)
            chan = self._actions[name]
            chan.on_goal = on_goal
            chan.on_cancel = on_cancel

    def action_channel(self, name: str) -> _ActionChannel:
        with self.lock:
            if name not in self._actions:
                raise UnknownService(f"unknown action {name!r}")
            return self._actions[name]

    def send_goal(self, name: str, goal: Any) -> GoalHandle:
        with self.lock:
            return self.action_channel(name).send_goal(goal)

    def action_names(self) -> list[str]:
        with self.lock:
            return sorted(self._actions)

    # --- scheduler --------------------------------------------------------

    def add_component(self, name: str, fn: Callable[[int], None], rate_hz: float) -> None:
        """Register a periodic callback; rate must divide the base tick rate."""
        with self.lock:
            period = NS_PER_SEC / rate_hz
            divisor = max(1, int(round(period / self.clock.tick_ns)))
            self._components.append(_Component(name, fn, divisor))

    def component_runs(self) -> dict[str, int]:
        with self.lock:
            return {c.name: c.runs for c in self._components}

    def scheduling_order(self) -> list[str]:
        with self.lock:
            return [c.name for c in self._components]

    def step(self, n: int = 1) -> int:
        """Advance the clock n ticks, running due components in registration order."""
        if self._pacer is not None:
            raise ClockModeError("step() while free-running pacer owns the clock")
        for _ in range(n):
            self._step_once()
        return self.clock.now

    def _step_once(self) -> None:
        with self.lock:
            self.clock.tick_index += 1
            self.clock.now += self.clock.tick_ns
            for comp in self._components:
                if self.clock.tick_index % comp.divisor == 0:
                    comp.fn(self.clock.now)
                    comp.runs += 1
            self._step_cv.notify_all()

    def run_for(self, duration_s: float) -> int:
        return self.step(int(round(duration_s * NS_PER_SEC / self.clock.tick_ns)))

    def run_until(self, predicate: Callable[[], bool], timeout_s: float = 120.0) -> bool:
        """Lockstep helper: step until predicate() or simulated timeout."""
        deadline = self.clock.now + self.seconds(timeout_s)
        while not predicate():
            if self.clock.now >= deadline:
                return False
            self.step()
        return True

    # --- free-running mode --------------------------------------------------

    def start_realtime(self, speed: float = 1.0) -> None:
        """Step the clock from a pacer thread; speed<=0 runs unthrottled."""
        if self.mode is not ClockMode.REALTIME:
            raise ClockModeError("bus not configured for realtime mode")
        if self._pacer is not None:
            return
        self._pacer_stop.clear()

        def pace():
            start = time.monotonic()
            while not self._pacer_stop.is_set():
                self._step_once()
                if speed > 0:
                    target = start + (self.clock.tick_index * self.clock.tick_ns / NS_PER_SEC) / speed
                    delay = target - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)

        self._pacer = threading.Thread(target=pace, name="bus-pacer", daemon=True)
        self._pacer.start()

    def stop_realtime(self) -> None:
        if self._pacer is None:
            return
        self._pacer_stop.set()
        self._pacer.join()
        self._pacer = None

    def wait_until(self, predicate: Callable[[], bool], timeout_s: float = 30.0) -> bool:
        """Realtime helper: block the calling thread until predicate()."""
        deadline = time.monotonic() + timeout_s
        with self._step_cv:
            while not predicate():
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._step_cv.wait(min(remaining, 0.1))
            return True

    # --- log ----------------------------------------------------------------

    def _log(self, kind: str, topic: str, payload: Any) -> None:
        if not self.record_log:
            return
        try:
            data = msgs.encode(payload) if payload is not None else None
        except Exception:
            data = {"type": "repr", "data": repr(payload)}
        self._log_records.append(
            json.dumps({"t_ns": self.clock.now, "topic": topic, "payload": data})
        )

    def log_lines(self, topic_prefix: str = "") -> list[str]:
        with self.lock:
            if not topic_prefix:
                return list(self._log_records)
            out = []
            for line in self._log_records:
                rec = json.loads(line)
                if rec["topic"].startswith(topic_prefix):
                    out.append(line)
            return out

    def dump_log(self, path: str) -> None:
        with open(path, "w") as f:
            for line in self.log_lines():
                f.write(line + "\n")
