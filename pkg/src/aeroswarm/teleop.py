"""Keyboard teleoperation client: one TeleopCommand per keypress.

Velocity keys nudge the commanded setpoint in 0.5 m/s steps; discrete
keys map to takeoff, land, hover, and emergency kill.  Commands go
through the ground-control HTTP API only, and every rejection is shown
on screen, never dropped.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .console import ApiError, GcsClient

STEP = 0.5  # m/s per keypress

KEY_HELP = (
    "t takeoff   l land   h hover   SPACE kill   q quit",
    "w/s or UP/DOWN: +/- north    d/a or RIGHT/LEFT: +/- east",
    "r/f: +/- up   (each press steps the velocity setpoint 0.5 m/s)",
)

# normalized key name -> per-press velocity increment (east, north, up)
_NUDGES = {
    "w": (0.0, STEP, 0.0),
    "s": (0.0, -STEP, 0.0),
    "UP": (0.0, STEP, 0.0),
    "DOWN": (0.0, -STEP, 0.0),
    "d": (STEP, 0.0, 0.0),
    "a": (-STEP, 0.0, 0.0),
    "RIGHT": (STEP, 0.0, 0.0),
    "LEFT": (-STEP, 0.0, 0.0),
    "r": (0.0, 0.0, STEP),
    "f": (0.0, 0.0, -STEP),
}


def command_for_key(key: str, velocity: tuple) -> tuple[Optional[dict], tuple]:
    """Map one keypress to (TeleopCommand or None, updated velocity setpoint)."""
    if key == "t":
        return {"kind": "takeoff"}, velocity
    if key == "l":
        return {"kind": "land"}, velocity
    if key == " ":
        return {"kind": "kill"}, velocity
    if key == "h":
        return {"kind": "hover"}, (0.0, 0.0, 0.0)
    nudge = _NUDGES.get(key)
    if nudge is None:
        return None, velocity
    new_v = tuple(round(a + b, 6) for a, b in zip(velocity, nudge))
    return {"kind": "velocity", "velocity": list(new_v)}, new_v


def _read_key(stream) -> str:
    """One key, with ANSI arrow sequences normalized to UP/DOWN/LEFT/RIGHT."""
    ch = stream.read(1)
    if ch != "\x1b":
        return ch
    if stream.read(1) != "[":
        return ch
    final = stream.read(1)
    return {"A": "UP", "B": "DOWN", "C": "RIGHT", "D": "LEFT"}.get(final, ch)


def run_loop(client: GcsClient, ns: str, stdin=None, out=None) -> int:
    import termios
    import tty

    stdin = stdin or sys.stdin
    out = out or sys.stdout
    fd = stdin.fileno()
    saved = termios.tcgetattr(fd)
    velocity = (0.0, 0.0, 0.0)
    out.write(f"teleoperating {ns} via {client.endpoint}\n")
    for line in KEY_HELP:
        out.write(line + "\n")
    out.flush()
    try:
        # TCSANOW: the default TCSAFLUSH discards keys typed before startup
        tty.setcbreak(fd, termios.TCSANOW)
        while True:
            key = _read_key(stdin)
            if key in ("q", "Q", "\x03"):
                return 0
            command, velocity = command_for_key(key, velocity)
            if command is None:
                continue
            try:
                client.teleop(ns, command)
                status = "ok"
            except ApiError as e:
                status = f"REJECTED: {e.reason}"
            except ConnectionError as e:
                status = f"UNREACHABLE: {e}"
            vx, vy, vz = velocity
            out.write(f"\r{command['kind']:8s} v=({vx:+.1f} {vy:+.1f} {vz:+.1f}) m/s  {status:<48s}")
            out.flush()
    finally:
        termios.tcsetattr(fd, termios.TCSADRAIN, saved)
        out.write("\n")


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="keyboard teleoperation through the ground-control service")
    parser.add_argument("--endpoint", default="http://127.0.0.1:8080")
    parser.add_argument("--ns", required=True, help="drone namespace to command")
    args = parser.parse_args(argv)

    client = GcsClient(args.endpoint)
    namespaces = [d["ns"] for d in client.drones()]
    if args.ns not in namespaces:
        print(f"unknown drone '{args.ns}'; available: {', '.join(namespaces)}", file=sys.stderr)
        return 1
    return run_loop(client, args.ns)


if __name__ == "__main__":
    raise SystemExit(main())
