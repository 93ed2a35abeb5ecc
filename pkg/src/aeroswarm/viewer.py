"""Alphanumeric terminal dashboard for a running ground-control service.

Information is split across panes (sensors, estimation, references,
platform, behaviors) selected by number keys; left/right or tab cycles
the watched drone.  The tool polls the HTTP API, never the bus, and
shows a STALE banner with a reconnect loop when the service drops.
"""

from __future__ import annotations

import argparse
import math
import time
from typing import Optional

from .console import ApiError, GcsClient

PANES = ("sensors", "estimation", "references", "platform", "behaviors")
STALE_AFTER_S = 1.0


def _yaw_deg(q) -> float:
    # quaternion [w, x, y, z]: heading of the body x-axis in the world xy plane
    w, x, y, z = (float(c) for c in q)
    return math.degrees(math.atan2(2.0 * (x * y + w * z), 1.0 - 2.0 * (y * y + z * z)))


def _vec(v, unit: str = "") -> str:
    if v is None:
        return "-"
    return " ".join(f"{float(c):+8.3f}" for c in v) + (f" {unit}" if unit else "")


def _kin_lines(label: str, ks: Optional[dict]) -> list[str]:
    if ks is None:
        return [f"{label}: no data"]
    return [
        f"{label} [{ks.get('frame_id', '?')}] t={ks.get('t', 0) / 1e9:.2f}s",
        f"  p   {_vec(ks.get('position'), 'm')}",
        f"  v   {_vec(ks.get('velocity'), 'm/s')}",
        f"  yaw {_yaw_deg(ks['orientation']):+7.1f} deg" if ks.get("orientation") else "  yaw -",
    ]


def render_pane(pane: str, snapshot: dict) -> list[str]:
    """Pure rendering of one pane from a /drones/{ns} snapshot."""
    if pane == "sensors":
        sensors = snapshot.get("sensors", {})
        lines: list[str] = []
        for name in ("odom", "imu", "mocap"):
            lines.extend(_kin_lines(name, sensors.get(name)))
        gps = sensors.get("gps")
        if gps is not None:
            lines.append(
                f"gps  lat {gps['latitude']:+12.7f}  lon {gps['longitude']:+12.7f}"
                f"  alt {gps['altitude']:8.2f} m"
            )
        else:
            lines.append("gps: no data")
        return lines
    if pane == "estimation":
        return _kin_lines("estimate", snapshot.get("pose"))
    if pane == "references":
        ref = snapshot.get("reference")
        ctrl = snapshot.get("controller") or {}
        if ref is None:
            lines = ["reference: none"]
        else:
            mode = ref.get("mode", {})
            lines = [
                f"reference [{ref.get('frame_id', '?')}] "
                f"{mode.get('control_kind', '?')}/{mode.get('yaw_kind', '?')}/{mode.get('frame_kind', '?')}",
            ]
            if ref.get("position") is not None:
                lines.append(f"  p   {_vec(ref['position'], 'm')}")
            if ref.get("velocity") is not None:
                lines.append(f"  v   {_vec(ref['velocity'], 'm/s')}")
            traj = ref.get("trajectory")
            if traj is not None:
                lines.append(f"  sp  p {_vec(traj.get('position'), 'm')}")
                lines.append(f"      v {_vec(traj.get('velocity'), 'm/s')}")
            if ref.get("yaw") is not None:
                lines.append(f"  yaw {math.degrees(float(ref['yaw'])):+7.1f} deg")
        lines.append(
            f"controller {ctrl.get('plugin', '?')}"
            + (" (bypass)" if ctrl.get("bypass") else "")
            + (f"  error: {ctrl['error']}" if ctrl.get("error") else "")
        )
        return lines
    if pane == "platform":
        info = snapshot.get("platform")
        if info is None:
            return ["platform: no data"]
        mode = info.get("active_mode", {})
        return [
            f"connected={info.get('connected')} armed={info.get('armed')} "
            f"offboard={info.get('offboard')} status={info.get('flight_status')}",
            f"active mode {mode.get('control_kind', '?')}/{mode.get('yaw_kind', '?')}/{mode.get('frame_kind', '?')}",
            f"supported modes: {len(info.get('supported_modes', []))}",
        ]
    if pane == "behaviors":
        lines = []
        for name, status in sorted((snapshot.get("behaviors") or {}).items()):
            if status is None:
                lines.append(f"{name:18s} unavailable")
                continue
            fb = status.get("feedback") or {}
            brief = ", ".join(f"{k}={fb[k]:.2f}" if isinstance(fb[k], float) else f"{k}={fb[k]}" for k in sorted(fb))
            lines.append(
                f"{name:18s} {status.get('state', '?'):8s} last={status.get('last_result', '?'):8s} {brief}"
            )
        item = snapshot.get("mission_item")
        lines.append(f"mission item: {item if item is not None else '-'}")
        return lines
    raise ValueError(f"unknown pane '{pane}'")


def render_screen(
    pane: str,
    namespaces: list[str],
    active_ns: str,
    snapshot: Optional[dict],
    stale: bool,
) -> list[str]:
    tabs = "  ".join(f"[{p}]" if p == pane else p for p in PANES)
    drones = "  ".join(f"<{ns}>" if ns == active_ns else ns for ns in namespaces)
    lines = [
        "aeroswarm viewer   keys: 1-5 pane, tab drone, q quit",
        f"drones: {drones}",
        f"panes:  {tabs}",
    ]
    if stale:
        lines.append("*** STALE: service unreachable, reconnecting ***")
    lines.append("-" * 72)
    if snapshot is None:
        lines.append("waiting for data")
    else:
        lines.extend(render_pane(pane, snapshot))
    return lines


def render_all(namespaces: list[str], snapshots: dict[str, dict]) -> list[str]:
    """One-shot dump of every pane of every drone (the --once path)."""
    lines = []
    for ns in namespaces:
        lines.append(f"=== {ns} ===")
        for pane in PANES:
            lines.append(f"--- {pane} ---")
            lines.extend(render_pane(pane, snapshots[ns]))
    return lines


def _run_curses(client: GcsClient, rate_hz: float, initial_ns: Optional[str]) -> int:
    import curses

    def loop(screen) -> None:
        curses.curs_set(0)
        screen.nodelay(True)
        namespaces: list[str] = []
        active_ns = initial_ns or ""
        pane = PANES[0]
        snapshot: Optional[dict] = None
        last_ok = 0.0
        period = 1.0 / rate_hz
        while True:
            key = screen.getch()
            if key in (ord("q"), ord("Q")):
                return
            if ord("1") <= key <= ord(str(len(PANES))):
                pane = PANES[key - ord("1")]
            if key in (9, curses.KEY_RIGHT, curses.KEY_LEFT) and namespaces:
                step = -1 if key == curses.KEY_LEFT else 1
                idx = namespaces.index(active_ns) if active_ns in namespaces else 0
                active_ns = namespaces[(idx + step) % len(namespaces)]
            try:
                if not namespaces:
                    namespaces = [d["ns"] for d in client.drones()]
                    if namespaces and active_ns not in namespaces:
                        active_ns = namespaces[0]
                if active_ns:
                    snapshot = client.drone(active_ns)
                last_ok = time.monotonic()
            except (ConnectionError, ApiError):
                pass
            stale = time.monotonic() - last_ok > STALE_AFTER_S
            screen.erase()
            rows, cols = screen.getmaxyx()
            for i, line in enumerate(render_screen(pane, namespaces, active_ns, snapshot, stale)[: rows - 1]):
                screen.addnstr(i, 0, line, cols - 1)
            screen.refresh()
            time.sleep(period)

    curses.wrapper(loop)
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="terminal dashboard for the ground-control service")
    parser.add_argument("--endpoint", default="http://127.0.0.1:8080")
    parser.add_argument("--ns", default=None, help="drone shown first")
    parser.add_argument("--rate", type=float, default=10.0, help="refresh rate, Hz")
    parser.add_argument("--once", action="store_true", help="print one snapshot of every pane and exit")
    args = parser.parse_args(argv)

    client = GcsClient(args.endpoint)
    if args.once:
        try:
            namespaces = [d["ns"] for d in client.drones()]
            snapshots = {ns: client.drone(ns) for ns in namespaces}
        except (ConnectionError, ApiError) as e:
            print(f"STALE: {e}")
            return 1
        print("\n".join(render_all(namespaces, snapshots)))
        return 0
    return _run_curses(client, max(args.rate, 5.0), args.ns)


if __name__ == "__main__":
    raise SystemExit(main())
