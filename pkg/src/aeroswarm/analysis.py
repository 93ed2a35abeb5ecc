"""Flight-log evaluation helpers: trail recording, gate-crossing
extraction, and deviation of a flown trail from a planned polyline.

These run on ground-truth odometry samples, so they measure what the
vehicle actually did, not what the estimator believed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bus import MessageBus
from .msgs import KinematicState


class FlightTrail:
    """Records every ground-truth odometry sample of one drone."""

    def __init__(self, bus: MessageBus, ns: str):
        self.ns = ns
        self.stamps: list[int] = []
        self.points: list[np.ndarray] = []
        bus.subscribe(f"{ns}/sensor/odom", self._on_sample)

    def _on_sample(self, msg: KinematicState) -> None:
        self.stamps.append(msg.t)
        self.points.append(msg.position.copy())

    def positions(self) -> np.ndarray:
        return np.vstack(self.points) if self.points else np.zeros((0, 3))

    def times_s(self) -> np.ndarray:
        return np.asarray(self.stamps, dtype=float) * 1e-9


@dataclass(frozen=True)
class GateCrossing:
    t_s: float
    point: np.ndarray  # earth frame, interpolated onto the gate plane
    offset: float  # distance from the gate center within the gate plane


def gate_crossings(
    stamps_s: np.ndarray,
    positions: np.ndarray,
    gate_position: Sequence[float],
    gate_yaw: float,
    aperture: float = 1.5,
) -> list[GateCrossing]:
    """Sign changes of the gate-frame x coordinate within the gate aperture.

    The gate plane is x=0 in the gate frame; a crossing is counted when
    consecutive samples straddle it and the interpolated point lies
    within `aperture` meters of the gate center.
    """
    center = np.asarray(gate_position, dtype=float)
    c, s = math.cos(gate_yaw), math.sin(gate_yaw)
    local = (positions - center) @ np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    x = local[:, 0]
    out: list[GateCrossing] = []
    for k in range(1, len(x)):
        if x[k - 1] == 0.0 or x[k - 1] * x[k] >= 0.0:
            continue
        f = x[k - 1] / (x[k - 1] - x[k])
        plane_pt = local[k - 1] + f * (local[k] - local[k - 1])
        offset = float(math.hypot(plane_pt[1], plane_pt[2]))
        if offset > aperture:
            continue
        t = stamps_s[k - 1] + f * (stamps_s[k] - stamps_s[k - 1])
        earth_pt = positions[k - 1] + f * (positions[k] - positions[k - 1])
        out.append(GateCrossing(float(t), earth_pt, offset))
    return out


def polyline_deviation_rms(
    positions: np.ndarray, waypoints: Sequence[Sequence[float]], t0_mask: Optional[np.ndarray] = None
) -> float:
    """RMS of each sample's distance to the nearest point on the waypoint polyline."""
    pts = np.asarray(positions, dtype=float)
    if t0_mask is not None:
        pts = pts[t0_mask]
    wp = np.asarray(waypoints, dtype=float)
    if len(wp) < 2:
        raise ValueError("polyline needs at least two waypoints")
    if len(pts) == 0:
        raise ValueError("no samples")
    a = wp[:-1]  # (m, 3) segment starts
    d = wp[1:] - a  # (m, 3) segment vectors
    dd = np.einsum("md,md->m", d, d)
    dd[dd == 0.0] = 1.0
    # (n, m) parameter of the closest point on each segment, clamped
    u = np.clip(np.einsum("nmd,md->nm", pts[:, None, :] - a[None, :, :], d) / dd, 0.0, 1.0)
    closest = a[None, :, :] + u[:, :, None] * d[None, :, :]
    dist = np.linalg.norm(pts[:, None, :] - closest, axis=2).min(axis=1)
    return float(np.sqrt(np.mean(dist**2)))
