"""Mission-control gateway: the HTTP and WebSocket front door to a stack.

Every mutation (mission upload and control, teleoperation) goes through
bus services or goals under the bus lock, so concurrent clients are
serialized in arrival order.  Telemetry fan-out is read-only: the bus
telemetry task publishes frames, this service copies them to every
connected WebSocket client and, with a record path set, to a
newline-delimited JSON file.
"""

from __future__ import annotations

import argparse
import json
import queue
import threading
from dataclasses import dataclass
from functools import partial
from typing import Optional

import anyio
import numpy as np
import uvicorn
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .behaviors import BEHAVIOR_NAMES
from .bus import ActionBusy, ActionRejected, ClockMode, MessageBus
from .coverage import CoverageError, CoveragePlanConfig, plan_coverage
from .mission import MissionError, MissionDocument, MissionValidationError
from .msgs import GeoPoint, speed_reference
from .stack import StackConfig, SwarmStack, TELEMETRY_TOPIC

TELEOP_KINDS = ("velocity", "takeoff", "land", "hover", "kill")


@dataclass
class GcsConfig:
    bind: str = "127.0.0.1"
    port: int = 8080
    teleop_max_speed: float = 2.0  # m/s, per-axis commanded magnitude cap
    teleop_takeoff_height: float = 2.0
    teleop_takeoff_speed: float = 1.0
    teleop_land_speed: float = 0.5
    record: Optional[str] = None


class GcsService:
    """Wraps one SwarmStack with the client-facing API."""

    def __init__(self, stack: SwarmStack, config: Optional[GcsConfig] = None):
        self.stack = stack
        self.bus: MessageBus = stack.bus
        self.config = config or GcsConfig()
        self._clients: set[queue.Queue] = set()
        self._clients_lock = threading.Lock()
        self._record_file = open(self.config.record, "a") if self.config.record else None
        self._mission_seq = 0
        self.bus.subscribe(TELEMETRY_TOPIC, self._on_frame)
        self.app = self._build_app()

    # -- telemetry fan-out ---------------------------------------------------

    def _on_frame(self, frame: dict) -> None:
        line = json.dumps(frame, sort_keys=True, separators=(",", ":"))
        if self._record_file is not None:
            self._record_file.write(line + "\n")
            self._record_file.flush()
        with self._clients_lock:
            for q in self._clients:
                q.put(line)

    def _register_client(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        latest = self.bus.latched_value(TELEMETRY_TOPIC)
        if latest is not None:
            q.put(json.dumps(latest, sort_keys=True, separators=(",", ":")))
        with self._clients_lock:
            self._clients.add(q)
        return q

    def _unregister_client(self, q: queue.Queue) -> None:
        with self._clients_lock:
            self._clients.discard(q)

    # -- snapshot helpers ------------------------------------------------------

    def _latched_json(self, topic: str):
        if topic not in self.bus.topic_names():
            return None
        value = self.bus.latched_value(topic)
        if value is None:
            return None
        return value.to_json() if hasattr(value, "to_json") else value

    def _drone_snapshot(self, ns: str) -> dict:
        return {
            "ns": ns,
            "platform": self._latched_json(f"{ns}/platform/info"),
            "pose": self._latched_json(f"{ns}/self_localization/pose"),
            "behaviors": {
                name: self._latched_json(f"{ns}/behavior/{name}/status") for name in BEHAVIOR_NAMES
            },
            "reference": self._latched_json(f"{ns}/motion_reference"),
            "controller": self._latched_json(f"{ns}/controller/info"),
            "sensors": {
                "odom": self._latched_json(f"{ns}/sensor/odom"),
                "imu": self._latched_json(f"{ns}/sensor/imu"),
                "mocap": self._latched_json(f"{ns}/sensor/mocap"),
                "gps": self._latched_json(f"{ns}/sensor/gps"),
            },
            "mission_item": self.stack.current_mission_item(ns),
        }

    def _stop_active_behaviors(self, ns: str) -> None:
        """Teleop precedence: explicit takeover, never blending."""
        for name in BEHAVIOR_NAMES:
            status = self.bus.latched_value(f"{ns}/behavior/{name}/status")
            if status is not None and status.state.value != "IDLE":
                self.bus.call(f"{ns}/behavior/{name}/stop", {})

    # -- teleop dispatch -------------------------------------------------------

    def _teleop(self, ns: str, body: dict) -> tuple[int, dict]:
        kind = body.get("kind")
        if kind not in TELEOP_KINDS:
            return 422, {"accepted": False, "reason": f"unknown teleop kind {kind!r}"}
        if kind == "kill":
            self.bus.call(f"{ns}/platform/kill", {"value": True})
            return 200, {"accepted": True, "reason": ""}
        if kind == "velocity":
            try:
                v = np.asarray([float(x) for x in body["velocity"]], dtype=float)
            except (KeyError, TypeError, ValueError):
                return 422, {"accepted": False, "reason": "velocity must be three numbers"}
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                return 422, {"accepted": False, "reason": "velocity must be three finite numbers"}
            limit = self.config.teleop_max_speed
            speed = float(np.linalg.norm(v))
            if speed > limit + 1e-9:
                return 422, {
                    "accepted": False,
                    "reason": f"speed {speed:.2f} m/s exceeds teleop limit {limit:.2f} m/s",
                }
            yaw_rate = body.get("yaw_rate")
            self._stop_active_behaviors(ns)
            ref = speed_reference(v, "earth", None if yaw_rate is None else float(yaw_rate), t=self.bus.now)
            self.bus.publish(f"{ns}/motion_reference", ref)
            return 200, {"accepted": True, "reason": ""}
        goal_args: dict = {}
        if kind == "takeoff":
            goal_args = {
                "height": float(body.get("height", self.config.teleop_takeoff_height)),
                "speed": float(body.get("speed", self.config.teleop_takeoff_speed)),
            }
        elif kind == "land":
            goal_args = {"speed": float(body.get("speed", self.config.teleop_land_speed))}
        self._stop_active_behaviors(ns)
        try:
            self.bus.send_goal(f"{ns}/behavior/{kind}", goal_args)
        except (ActionRejected, ActionBusy) as e:
            return 409, {"accepted": False, "reason": str(e)}
        return 200, {"accepted": True, "reason": ""}

    # -- app -------------------------------------------------------------------

    def _build_app(self) -> FastAPI:
        app = FastAPI(title="aeroswarm ground control", docs_url=None, redoc_url=None)
        service = self

        def missing(kind: str, name: str) -> JSONResponse:
            return JSONResponse({"error": f"unknown {kind} '{name}'"}, status_code=404)

        @app.get("/drones")
        async def drones():
            return {
                "drones": [
                    {
                        "ns": ns,
                        "preset": d.spec.preset,
                        "estimator": d.estimator.active,
                        "controller": d.controller.active_plugin,
                    }
                    for ns, d in service.stack.drones.items()
                ]
            }

        @app.get("/drones/{ns}")
        async def drone_detail(ns: str):
            if ns not in service.stack.drones:
                return missing("drone", ns)
            return service._drone_snapshot(ns)

        @app.get("/world")
        async def world():
            origin = service.stack.origin
            return {
                "origin": origin.require().to_json() if origin is not None else None,
                "objects": [
                    {"name": o.name, "position": list(o.position), "yaw_deg": o.yaw_deg}
                    for o in service.stack.config.world.objects
                ],
            }

        @app.get("/missions")
        async def missions():
            return {
                "missions": [
                    {"id": label, "name": runner.doc.name, "state": runner.state}
                    for label, runner in service.stack.missions.items()
                ]
            }

        @app.post("/missions")
        async def upload_mission(request: Request):
            body = await request.json()
            try:
                doc = MissionDocument.from_json(body)
            except MissionValidationError as e:
                return JSONResponse({"violations": e.violations}, status_code=422)
            service._mission_seq += 1
            label = f"m{service._mission_seq}"
            try:
                runner = service.stack.add_mission(doc, label=label)
            except ValueError as e:
                service._mission_seq -= 1
                return JSONResponse({"violations": [str(e)]}, status_code=422)
            return {"id": label, "state": runner.state}

        @app.post("/missions/{mission_id}/start")
        async def start_mission(mission_id: str):
            runner = service.stack.missions.get(mission_id)
            if runner is None:
                return missing("mission", mission_id)
            try:
                runner.start()
            except MissionError as e:
                return JSONResponse({"error": str(e)}, status_code=409)
            return {"id": mission_id, "state": runner.state}

        @app.post("/missions/{mission_id}/pause")
        async def pause_mission(mission_id: str):
            runner = service.stack.missions.get(mission_id)
            if runner is None:
                return missing("mission", mission_id)
            if runner.state != "PAUSED":  # pausing a paused mission is a no-op
                try:
                    runner.pause()
                except MissionError as e:
                    return JSONResponse({"error": str(e)}, status_code=409)
            return {"id": mission_id, "state": runner.state}

        @app.post("/missions/{mission_id}/resume")
        async def resume_mission(mission_id: str):
            runner = service.stack.missions.get(mission_id)
            if runner is None:
                return missing("mission", mission_id)
            try:
                runner.resume()
            except MissionError as e:
                return JSONResponse({"error": str(e)}, status_code=409)
            return {"id": mission_id, "state": runner.state}

        @app.post("/missions/{mission_id}/stop")
        async def stop_mission(mission_id: str):
            runner = service.stack.missions.get(mission_id)
            if runner is None:
                return missing("mission", mission_id)
            runner.stop()
            return {"id": mission_id, "state": runner.state}

        @app.get("/missions/{mission_id}/report")
        async def mission_report(mission_id: str):
            runner = service.stack.missions.get(mission_id)
            if runner is None:
                return missing("mission", mission_id)
            return runner.report()

        @app.post("/plan/coverage")
        async def coverage(request: Request):
            body = await request.json()
            if service.stack.origin is None:
                return JSONResponse({"error": "no geodetic origin configured"}, status_code=400)
            try:
                polygon = [GeoPoint.from_json(p) for p in body["polygon"]]
                spacing = float(body["spacing"])
                drones = [str(ns) for ns in body["drones"]]
            except (KeyError, TypeError, ValueError) as e:
                return JSONResponse({"error": f"bad plan request: {e}"}, status_code=422)
            unknown = [ns for ns in drones if ns not in service.stack.drones]
            if unknown:
                return JSONResponse({"error": f"unknown drones: {unknown}"}, status_code=422)
            plan_cfg = CoveragePlanConfig(
                altitude=float(body.get("altitude", CoveragePlanConfig.altitude)),
                flight_speed=float(body.get("flight_speed", CoveragePlanConfig.flight_speed)),
                takeoff_speed=float(body.get("takeoff_speed", CoveragePlanConfig.takeoff_speed)),
                land_speed=float(body.get("land_speed", CoveragePlanConfig.land_speed)),
            )
            try:
                doc = plan_coverage(polygon, spacing, drones, service.stack.origin, plan_cfg)
            except (CoverageError, ValueError) as e:
                return JSONResponse({"error": str(e)}, status_code=400)
            return doc.to_json()

        @app.post("/teleop/{ns}")
        async def teleop(ns: str, request: Request):
            if ns not in service.stack.drones:
                return missing("drone", ns)
            body = await request.json()
            status, payload = service._teleop(ns, body)
            return JSONResponse(payload, status_code=status)

        @app.websocket("/telemetry")
        async def telemetry(ws: WebSocket):
            await ws.accept()
            q = service._register_client()
            try:
                while True:
                    try:
                        line = await anyio.to_thread.run_sync(partial(q.get, timeout=0.5))
                    except queue.Empty:
                        continue
                    await ws.send_text(line)
            except (WebSocketDisconnect, RuntimeError):
                pass
            finally:
                service._unregister_client(q)

        return app


def serve(stack: SwarmStack, config: Optional[GcsConfig] = None, speed: float = 1.0) -> None:
    service = GcsService(stack, config)
    if stack.bus.mode is ClockMode.REALTIME:
        stack.bus.start_realtime(speed)
    cfg = service.config
    try:
        uvicorn.run(service.app, host=cfg.bind, port=cfg.port, log_level="warning")
    finally:
        if stack.bus.mode is ClockMode.REALTIME:
            stack.bus.stop_realtime()


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="serve the ground-control HTTP/WebSocket API")
    parser.add_argument("--config", required=True, help="stack scenario JSON")
    parser.add_argument("--bind", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument("--telemetry-hz", type=float, default=None, help="override the stack telemetry rate")
    parser.add_argument("--record", default=None, help="append telemetry frames to this NDJSON file")
    parser.add_argument("--speed", type=float, default=1.0, help="realtime pacing factor; <=0 unthrottled")
    args = parser.parse_args(argv)

    stack_config = StackConfig.from_file(args.config)
    if args.telemetry_hz is not None:
        stack_config.telemetry_hz = args.telemetry_hz
    bus = MessageBus(tick_ns=stack_config.tick_ns, mode=ClockMode.REALTIME)
    stack = SwarmStack(stack_config, bus)
    serve(stack, GcsConfig(bind=args.bind, port=args.port, record=args.record), speed=args.speed)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
