"""Plan-execution layer: mission documents, the per-drone interpreter,
and a blocking programmatic facade.

A mission document is JSON: a version plus, per drone namespace, an
ordered list of items.  Items either run a behavior (arm/offboard and
the six flight behaviors), wait at a named barrier until every
participant arrives, branch on the recorded result of an earlier item,
or end the drone's program.  The interpreter advances every drone's
program inside one bus component, so multi-drone rendezvous is exact:
all parties released by a barrier dispatch their next item on the same
tick.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import jsonschema
import numpy as np

from .behaviors import BEHAVIOR_NAMES
from .bus import (
    NS_PER_SEC,
    ActionRejected,
    ActionBusy,
    ClockMode,
    GoalHandle,
    MessageBus,
    ResultKind,
)
from .msgs import BehaviorStatus, KinematicState, PlatformInfo, position_reference, speed_reference

BARRIER_TIMEOUT_S = 30.0  # sim-time wait before a stuck barrier aborts the mission
SERVICE_ITEMS = ("arm", "offboard")  # platform services expressible as mission items
ITEM_KINDS = ("behavior", "barrier", "branch", "end")

MISSION_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Mission document",
    "type": "object",
    "required": ["version", "drones"],
    "additionalProperties": False,
    "properties": {
        "version": {"type": "integer", "minimum": 1},
        "name": {"type": "string"},
        "drones": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "array",
                "items": {"$ref": "#/$defs/item"},
            },
        },
    },
    "$defs": {
        "item": {
            "type": "object",
            "required": ["id", "kind"],
            "properties": {
                "id": {"type": "string", "minLength": 1},
                "kind": {"enum": list(ITEM_KINDS)},
                "name": {"enum": list(BEHAVIOR_NAMES) + list(SERVICE_ITEMS)},
                "args": {"type": "object"},
                "on_failure": {
                    "type": "object",
                    "required": ["action"],
                    "additionalProperties": False,
                    "properties": {
                        "action": {"enum": ["abort", "goto"]},
                        "target": {"type": "string"},
                    },
                },
                "label": {"type": "string", "minLength": 1},
                "participants": {
                    "type": "array",
                    "items": {"type": "string"},
                    "minItems": 1,
                },
                "of": {"type": "string"},
                "is": {"enum": ["SUCCESS", "FAILURE"]},
                "then": {"type": "string"},
                "else": {"type": "string"},
            },
            "allOf": [
                {
                    "if": {"properties": {"kind": {"const": "behavior"}}},
                    "then": {"required": ["name"]},
                },
                {
                    "if": {"properties": {"kind": {"const": "barrier"}}},
                    "then": {"required": ["label"]},
                },
                {
                    "if": {"properties": {"kind": {"const": "branch"}}},
                    "then": {"required": ["of", "is", "then", "else"]},
                },
            ],
        }
    },
}


class MissionError(RuntimeError):
    pass


class MissionValidationError(MissionError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class MissionItem:
    id: str
    kind: str
    name: str = ""  # behavior kind
    args: dict = field(default_factory=dict)
    on_failure: str = "abort"  # "abort" | "goto"
    failure_target: str = ""
    label: str = ""  # barrier kind
    participants: tuple[str, ...] = ()
    branch_of: str = ""  # branch kind
    branch_is: str = "SUCCESS"
    branch_then: str = ""
    branch_else: str = ""

    @staticmethod
    def from_json(d: dict) -> "MissionItem":
        fail = d.get("on_failure", {"action": "abort"})
        return MissionItem(
            id=d["id"],
            kind=d["kind"],
            name=d.get("name", ""),
            args=dict(d.get("args", {})),
            on_failure=fail.get("action", "abort"),
            failure_target=fail.get("target", ""),
            label=d.get("label", ""),
            participants=tuple(d.get("participants", ())),
            branch_of=d.get("of", ""),
            branch_is=d.get("is", "SUCCESS"),
            branch_then=d.get("then", ""),
            branch_else=d.get("else", ""),
        )

    def to_json(self) -> dict:
        out: dict = {"id": self.id, "kind": self.kind}
        if self.kind == "behavior":
            out["name"] = self.name
            out["args"] = dict(self.args)
            if self.on_failure == "goto":
                out["on_failure"] = {"action": "goto", "target": self.failure_target}
        elif self.kind == "barrier":
            out["label"] = self.label
            if self.participants:
                out["participants"] = list(self.participants)
        elif self.kind == "branch":
            out["of"] = self.branch_of
            out["is"] = self.branch_is
            out["then"] = self.branch_then
            out["else"] = self.branch_else
        return out


@dataclass
class MissionDocument:
    version: int
    drones: dict[str, list[MissionItem]]
    name: str = ""

    @staticmethod
    def from_json(d: dict) -> "MissionDocument":
        violations = validate_document(d)
        if violations:
            raise MissionValidationError(violations)
        return MissionDocument(
            version=d["version"],
            drones={ns: [MissionItem.from_json(i) for i in items] for ns, items in d["drones"].items()},
            name=d.get("name", ""),
        )

    def to_json(self) -> dict:
        out: dict = {
            "version": self.version,
            "drones": {ns: [i.to_json() for i in items] for ns, items in self.drones.items()},
        }
        if self.name:
            out["name"] = self.name
        return out


def validate_document(d: Any) -> list[str]:
    """All schema and cross-reference violations; empty means valid."""
    validator = jsonschema.Draft202012Validator(MISSION_SCHEMA)
    violations = [
        f"{'/'.join(str(p) for p in err.absolute_path) or '<root>'}: {err.message}"
        for err in validator.iter_errors(d)
    ]
    if violations:
        return violations
    drones: dict[str, list[dict]] = d["drones"]
    barrier_sets: dict[str, set[str]] = {}
    declared: dict[str, tuple] = {}
    for ns, items in drones.items():
        ids = [i["id"] for i in items]
        if len(ids) != len(set(ids)):
            dupes = sorted({x for x in ids if ids.count(x) > 1})
            violations.append(f"{ns}: duplicate item ids {dupes}")
        known = set(ids)
        labels_here = set()
        for item in items:
            if item["kind"] == "behavior":
                fail = item.get("on_failure", {})
                if fail.get("action") == "goto":
                    target = fail.get("target", "")
                    if target not in known:
                        violations.append(f"{ns}/{item['id']}: on_failure target '{target}' not found")
            elif item["kind"] == "branch":
                for key in ("of", "then", "else"):
                    if item[key] not in known:
                        violations.append(f"{ns}/{item['id']}: {key} target '{item[key]}' not found")
            elif item["kind"] == "barrier":
                label = item["label"]
                if label in labels_here:
                    violations.append(f"{ns}: barrier label '{label}' appears more than once")
                labels_here.add(label)
                barrier_sets.setdefault(label, set()).add(ns)
                if "participants" in item:
                    declared[label] = tuple(sorted(item["participants"]))
    for label, members in sorted(barrier_sets.items()):
        if label in declared:
            want = set(declared[label])
            unknown = want - set(drones)
            if unknown:
                violations.append(f"barrier '{label}': participants {sorted(unknown)} not in mission")
            elif members != want:
                violations.append(
                    f"barrier '{label}': declared participants {sorted(want)} but listed by {sorted(members)}"
                )
        elif len(members) < 2:
            violations.append(f"barrier '{label}': needs at least two participating drones")
    return violations


# -- interpreter ---------------------------------------------------------------


@dataclass
class _ItemRecord:
    id: str
    kind: str
    start_t: int
    end_t: Optional[int] = None
    result: str = ""
    reason: str = ""

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "start_t": self.start_t,
            "end_t": self.end_t,
            "result": self.result,
            "reason": self.reason,
        }


class _Program:
    """One drone's cursor through its item list."""

    def __init__(self, ns: str, items: list[MissionItem]):
        self.ns = ns
        self.items = items
        self.index = {item.id: k for k, item in enumerate(items)}
        self.pc = 0
        self.state = "RUNNING"  # RUNNING | WAIT_RESULT | WAIT_BARRIER | DONE | FAILED
        self.handle: Optional[GoalHandle] = None
        self.record: Optional[_ItemRecord] = None
        self.report: list[_ItemRecord] = []
        self.results: dict[str, str] = {}  # item id -> SUCCESS | FAILURE
        self.waiting_label = ""
        self.fail_reason = ""

    @property
    def terminal(self) -> bool:
        return self.state in ("DONE", "FAILED")

    def current(self) -> Optional[MissionItem]:
        if self.pc < len(self.items):
            return self.items[self.pc]
        return None


class _Barrier:
    def __init__(self, label: str, participants: frozenset):
        self.label = label
        self.participants = participants
        self.arrived: dict[str, int] = {}
        self.released_at: Optional[int] = None
        self.first_arrival: Optional[int] = None


class MissionRunner:
    """Executes one validated mission document over the bus.

    The runner is itself a bus component: every tick it first releases
    any barrier whose participants have all arrived, then advances each
    drone program in document order.
    """

    def __init__(self, bus: MessageBus, doc: MissionDocument, label: str = "mission", barrier_timeout_s: float = BARRIER_TIMEOUT_S):
        self.bus = bus
        self.doc = doc
        self.label = label
        self.barrier_timeout_ns = int(barrier_timeout_s * NS_PER_SEC)
        self.programs = {ns: _Program(ns, items) for ns, items in doc.drones.items()}
        self.barriers: dict[str, _Barrier] = {}
        for ns, items in doc.drones.items():
            for item in items:
                if item.kind == "barrier" and item.label not in self.barriers:
                    members = item.participants or tuple(
                        d for d, lst in doc.drones.items() if any(i.kind == "barrier" and i.label == item.label for i in lst)
                    )
                    self.barriers[item.label] = _Barrier(item.label, frozenset(members))
        self.state = "PENDING"  # PENDING | RUNNING | PAUSED | DONE | FAILED
        self.started_t: Optional[int] = None
        self.finished_t: Optional[int] = None
        self.diagnostic = ""
        self.pause_log: list[tuple[int, Optional[int]]] = []
        bus.add_component(f"{label}/runner", self._tick, rate_hz=NS_PER_SEC / bus.tick_ns)

    # -- control --

    def start(self) -> None:
        with self.bus.lock:
            if self.state != "PENDING":
                raise MissionError(f"mission already {self.state}")
            self.state = "RUNNING"
            self.started_t = self.bus.now

    def pause(self) -> None:
        with self.bus.lock:
            if self.state != "RUNNING":
                raise MissionError(f"pause rejected while {self.state}")
            self.state = "PAUSED"
            self.pause_log.append((self.bus.now, None))
            for prog in self.programs.values():
                item = prog.current()
                if prog.state == "WAIT_RESULT" and item is not None and item.name in BEHAVIOR_NAMES:
                    self.bus.call(f"{prog.ns}/behavior/{item.name}/pause", {})

    def resume(self) -> None:
        with self.bus.lock:
            if self.state != "PAUSED":
                raise MissionError(f"resume rejected while {self.state}")
            self.state = "RUNNING"
            if self.pause_log and self.pause_log[-1][1] is None:
                start, _ = self.pause_log[-1]
                self.pause_log[-1] = (start, self.bus.now)
            for prog in self.programs.values():
                item = prog.current()
                if prog.state == "WAIT_RESULT" and item is not None and item.name in BEHAVIOR_NAMES:
                    self.bus.call(f"{prog.ns}/behavior/{item.name}/resume", {})

    def stop(self) -> None:
        with self.bus.lock:
            if self.state in ("DONE", "FAILED"):
                return
            for prog in self.programs.values():
                item = prog.current()
                if prog.state == "WAIT_RESULT" and item is not None and item.name in BEHAVIOR_NAMES:
                    self.bus.call(f"{prog.ns}/behavior/{item.name}/stop", {})
                if not prog.terminal:
                    prog.state = "FAILED"
                    prog.fail_reason = "mission stopped"
                    if prog.record is not None and prog.record.end_t is None:
                        self._close_record(prog, "FAILURE", "mission stopped")
            self._finish("FAILED", "stopped by operator")

    @property
    def finished(self) -> bool:
        return self.state in ("DONE", "FAILED")

    def report(self) -> dict:
        with self.bus.lock:
            return {
                "label": self.label,
                "name": self.doc.name,
                "state": self.state,
                "started_t": self.started_t,
                "finished_t": self.finished_t,
                "diagnostic": self.diagnostic,
                "pauses": [list(p) for p in self.pause_log],
                "drones": {
                    ns: {
                        "state": prog.state,
                        "reason": prog.fail_reason,
                        "items": [r.to_json() for r in prog.report],
                    }
                    for ns, prog in self.programs.items()
                },
            }

    # -- execution --

    def _tick(self, now: int) -> None:
        if self.state != "RUNNING":
            return
        self._release_barriers(now)
        if self.state != "RUNNING":
            # a barrier abort already finished the mission with its own diagnostic
            return
        for prog in self.programs.values():
            self._advance(prog, now)
        if all(p.terminal for p in self.programs.values()):
            ok = all(p.state == "DONE" for p in self.programs.values())
            self._finish("DONE" if ok else "FAILED", "" if ok else "one or more drone programs failed")

    def _finish(self, state: str, diagnostic: str) -> None:
        self.state = state
        self.diagnostic = diagnostic
        self.finished_t = self.bus.now

    def _release_barriers(self, now: int) -> None:
        for b in self.barriers.values():
            if b.released_at is not None or not b.arrived:
                continue
            waiting = set(b.arrived)
            if waiting >= b.participants:
                b.released_at = now
                continue
            # a participant that already terminated can never arrive
            missing = b.participants - waiting
            dead = {ns for ns in missing if self.programs[ns].terminal}
            timed_out = b.first_arrival is not None and now - b.first_arrival > self.barrier_timeout_ns
            if dead or timed_out:
                why = (
                    f"barrier '{b.label}' deadlocked: waiting for {sorted(missing)}"
                    + (f", {sorted(dead)} already terminated" if dead else ", timed out")
                )
                self._abort_all(why)
                return

    def _abort_all(self, why: str) -> None:
        for prog in self.programs.values():
            item = prog.current()
            if prog.state == "WAIT_RESULT" and item is not None and item.name in BEHAVIOR_NAMES:
                self.bus.call(f"{prog.ns}/behavior/{item.name}/stop", {})
            if not prog.terminal:
                if prog.record is not None and prog.record.end_t is None:
                    self._close_record(prog, "FAILURE", why)
                prog.state = "FAILED"
                prog.fail_reason = why
        self._finish("FAILED", why)

    def _advance(self, prog: _Program, now: int) -> None:
        # resolve a finished behavior first, then run through instantaneous items
        if prog.state == "WAIT_RESULT":
            if prog.handle is None or not prog.handle.done:
                return
            result = prog.handle.result
            ok = result.kind is ResultKind.SUCCESS
            self._close_record(prog, "SUCCESS" if ok else "FAILURE", result.reason)
            item = prog.items[prog.pc]
            prog.results[item.id] = "SUCCESS" if ok else "FAILURE"
            prog.handle = None
            if ok:
                prog.pc += 1
                prog.state = "RUNNING"
            elif item.on_failure == "goto":
                prog.pc = prog.index[item.failure_target]
                prog.state = "RUNNING"
            else:
                prog.state = "FAILED"
                prog.fail_reason = f"item '{item.id}' failed: {result.reason}"
                return
        if prog.state == "WAIT_BARRIER":
            b = self.barriers[prog.waiting_label]
            if b.released_at is None:
                return
            self._close_record(prog, "SUCCESS", "")
            prog.pc += 1
            prog.state = "RUNNING"
        while prog.state == "RUNNING":
            item = prog.current()
            if item is None:
                prog.state = "DONE"
                return
            if item.kind == "end":
                prog.report.append(_ItemRecord(item.id, item.kind, now, now, "SUCCESS"))
                prog.results[item.id] = "SUCCESS"
                prog.state = "DONE"
                return
            if item.kind == "branch":
                seen = prog.results.get(item.branch_of)
                if seen is None:
                    prog.state = "FAILED"
                    prog.fail_reason = f"branch '{item.id}' references un-executed item '{item.branch_of}'"
                    return
                target = item.branch_then if seen == item.branch_is else item.branch_else
                prog.report.append(_ItemRecord(item.id, item.kind, now, now, "SUCCESS", f"-> {target}"))
                prog.results[item.id] = "SUCCESS"
                prog.pc = prog.index[target]
                continue
            if item.kind == "barrier":
                b = self.barriers[item.label]
                if prog.ns not in b.arrived:
                    b.arrived[prog.ns] = now
                    if b.first_arrival is None:
                        b.first_arrival = now
                prog.record = _ItemRecord(item.id, item.kind, now)
                prog.waiting_label = item.label
                prog.state = "WAIT_BARRIER"
                return
            # behavior item
            prog.record = _ItemRecord(item.id, item.kind, now)
            if item.name in SERVICE_ITEMS:
                reply = self.bus.call(f"{prog.ns}/platform/{item.name}", {"value": True})
                ok = bool(reply.get("ok", False))
                self._close_record(prog, "SUCCESS" if ok else "FAILURE", reply.get("reason", ""))
                prog.results[item.id] = "SUCCESS" if ok else "FAILURE"
                if ok:
                    prog.pc += 1
                    continue
                if item.on_failure == "goto":
                    prog.pc = prog.index[item.failure_target]
                    continue
                prog.state = "FAILED"
                prog.fail_reason = f"item '{item.id}' failed: {reply.get('reason', '')}"
                return
            try:
                prog.handle = self.bus.send_goal(f"{prog.ns}/behavior/{item.name}", dict(item.args))
            except (ActionRejected, ActionBusy) as e:
                self._close_record(prog, "FAILURE", str(e))
                prog.results[item.id] = "FAILURE"
                if item.on_failure == "goto":
                    prog.pc = prog.index[item.failure_target]
                    continue
                prog.state = "FAILED"
                prog.fail_reason = f"item '{item.id}' rejected: {e}"
                return
            prog.state = "WAIT_RESULT"
            return

    def _close_record(self, prog: _Program, result: str, reason: str) -> None:
        if prog.record is None:
            return
        prog.record.end_t = self.bus.now
        prog.record.result = result
        prog.record.reason = reason
        prog.report.append(prog.record)
        prog.record = None


# -- programmatic facade ---------------------------------------------------------


class FacadeError(MissionError):
    pass


class DroneFacade:
    """Blocking, per-drone front door mirroring the behavior goals.

    In lockstep mode the blocking calls drive the simulation forward
    themselves; in realtime mode they wait on the pacer thread.
    """

    def __init__(self, bus: MessageBus, ns: str, timeout_s: float = 300.0):
        self.bus = bus
        self.ns = ns
        self.timeout_s = timeout_s

    # -- platform services --

    def arm(self) -> bool:
        return bool(self.bus.call(f"{self.ns}/platform/arm", {"value": True}).get("ok"))

    def disarm(self) -> bool:
        return bool(self.bus.call(f"{self.ns}/platform/arm", {"value": False}).get("ok"))

    def offboard(self) -> bool:
        return bool(self.bus.call(f"{self.ns}/platform/offboard", {"value": True}).get("ok"))

    def kill(self) -> None:
        self.bus.call(f"{self.ns}/platform/kill", {})

    # -- behavior goals (blocking) --

    def takeoff(self, height: float, speed: float) -> bool:
        return self._run("takeoff", {"height": height, "speed": speed})

    def land(self, speed: float) -> bool:
        return self._run("land", {"speed": speed})

    def go_to(self, point, speed: float, frame_id: str = "earth") -> bool:
        args = {"point": [float(x) for x in point], "speed": speed}
        if frame_id != "earth":
            args["frame_id"] = frame_id
        return self._run("go_to", args)

    def follow_path(self, points, speed: float, frame_id: str = "earth") -> bool:
        args = {"points": [[float(x) for x in p] for p in points], "speed": speed}
        if frame_id != "earth":
            args["frame_id"] = frame_id
        return self._run("follow_path", args)

    def follow_trajectory(self, points, speed: float, frame_id: str = "earth") -> bool:
        args = {"points": [[float(x) for x in p] for p in points], "speed": speed}
        if frame_id != "earth":
            args["frame_id"] = frame_id
        return self._run("follow_trajectory", args)

    def start_hover(self) -> GoalHandle:
        """Hover never finishes by itself, so it does not block."""
        return self.bus.send_goal(f"{self.ns}/behavior/hover", {})

    def stop_behavior(self, name: str) -> bool:
        reply = self.bus.call(f"{self.ns}/behavior/{name}/stop", {})
        return bool(reply.get("accepted"))

    # -- direct motion references --

    def command_speed(self, v, yaw_rate: Optional[float] = None) -> None:
        ref = speed_reference(np.asarray(v, dtype=float), "earth", yaw_rate, t=self.bus.now)
        self.bus.publish(f"{self.ns}/motion_reference", ref)

    def command_position(self, p, yaw: Optional[float] = None) -> None:
        ref = position_reference(np.asarray(p, dtype=float), "earth", yaw, t=self.bus.now)
        self.bus.publish(f"{self.ns}/motion_reference", ref)

    # -- telemetry --

    def status(self) -> dict:
        info: Optional[PlatformInfo] = self.bus.latched_value(f"{self.ns}/platform/info")
        pose: Optional[KinematicState] = self.bus.latched_value(f"{self.ns}/self_localization/pose")
        behaviors: dict[str, BehaviorStatus] = {}
        for name in BEHAVIOR_NAMES:
            topic = f"{self.ns}/behavior/{name}/status"
            if topic in self.bus.topic_names():
                st = self.bus.latched_value(topic)
                if st is not None:
                    behaviors[name] = st
        return {"platform": info, "pose": pose, "behaviors": behaviors}

    # -- plumbing --

    def _run(self, name: str, args: dict) -> bool:
        handle = self.bus.send_goal(f"{self.ns}/behavior/{name}", args)
        if self.bus.mode is ClockMode.LOCKSTEP:
            done = self.bus.run_until(lambda: handle.done, timeout_s=self.timeout_s)
        else:
            done = self.bus.wait_until(lambda: handle.done, timeout_s=self.timeout_s)
        if not done:
            handle.cancel("facade timeout")
            raise FacadeError(f"{self.ns}/{name}: no result within {self.timeout_s} s")
        return handle.result.kind is ResultKind.SUCCESS


def listing_mission(
    drones: dict[str, dict],
    n_laps: int,
    height: float,
    takeoff_speed: float,
    flight_speed: float,
    land_speed: float,
    barrier_per_lap: bool = False,
) -> MissionDocument:
    """Gate-lap mission document: arm, offboard, takeoff, n_laps of gate
    paths, then land.

    `drones` maps namespace -> {"gates": [frame names in visit order]}.
    Each leg is the two-point crossing path expressed in the gate's own
    frame, entering one meter before the gate plane and exiting one
    meter past it.
    """
    doc: dict = {"version": 1, "name": "gate laps", "drones": {}}
    for ns, spec in drones.items():
        items: list[dict] = [
            {"id": "arm", "kind": "behavior", "name": "arm"},
            {"id": "offboard", "kind": "behavior", "name": "offboard"},
            {
                "id": "takeoff",
                "kind": "behavior",
                "name": "takeoff",
                "args": {"height": height, "speed": takeoff_speed},
            },
        ]
        for lap in range(1, n_laps + 1):
            for k, gate in enumerate(spec["gates"], start=1):
                items.append(
                    {
                        "id": f"lap{lap}_leg{k}",
                        "kind": "behavior",
                        "name": "follow_path",
                        "args": {
                            "points": [[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
                            "speed": flight_speed,
                            "frame_id": gate,
                        },
                    }
                )
            if barrier_per_lap:
                items.append({"id": f"lap{lap}_sync", "kind": "barrier", "label": f"lap{lap}"})
        items.append({"id": "land", "kind": "behavior", "name": "land", "args": {"speed": land_speed}})
        items.append({"id": "end", "kind": "end"})
        doc["drones"][ns] = items
    return MissionDocument.from_json(doc)


def dump_schema(path: str) -> None:
    with open(path, "w") as f:
        json.dump(MISSION_SCHEMA, f, indent=2, sort_keys=False)
        f.write("\n")
