"""Back-and-forth coverage planning over a geodetic polygon.

The planner converts the polygon to local ENU, sweeps it with parallel
lines aligned to its longest edge at perpendicular offsets of
spacing/2 + k*spacing, clips each line to the polygon, orders the
passes serpentine-style, splits contiguous blocks of passes between the
drones so their path lengths stay balanced, and emits a mission
document whose waypoints are geodetic again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from shapely.geometry import LineString, MultiLineString, Polygon

from .geodesy import GeoOrigin, enu_to_geo, geo_to_enu
from .mission import MissionDocument
from .msgs import GeoPoint

MIN_PASS_LENGTH = 1e-6  # clipped slivers below this are dropped
ANGLE_EPS = 1e-9  # angles this close to pi fold onto 0: same axis, same rows


class CoverageError(ValueError):
    pass


@dataclass(frozen=True)
class CoveragePlanConfig:
    altitude: float = 3.0  # ENU z flown during the sweep
    flight_speed: float = 2.0
    takeoff_speed: float = 1.0
    land_speed: float = 0.5

    def check(self) -> None:
        if min(self.altitude, self.flight_speed, self.takeoff_speed, self.land_speed) <= 0:
            raise CoverageError("altitude and speeds must be positive")


def sweep_angle(vertices: np.ndarray) -> float:
    """Axis angle in [0, pi) of the polygon's longest edge; ties go to the
    edge closer to east."""
    verts = np.asarray(vertices, dtype=float)
    n = len(verts)
    best: tuple[float, float] | None = None
    for k in range(n):
        d = verts[(k + 1) % n] - verts[k]
        length = float(np.hypot(d[0], d[1]))
        if length < MIN_PASS_LENGTH:
            continue
        theta = math.atan2(d[1], d[0]) % math.pi
        if math.pi - theta < ANGLE_EPS:
            theta = 0.0
        key = (-length, theta)
        if best is None or key < best:
            best = key
    if best is None:
        raise CoverageError("degenerate polygon: no edge with positive length")
    return best[1]


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def sweep_rows(vertices: np.ndarray, spacing: float) -> list[list[tuple[np.ndarray, np.ndarray]]]:
    """Serpentine-ordered passes; each row is a list of directed segments.

    Rows sit at perpendicular offsets spacing/2 + k*spacing from the
    polygon's minimal extent, measured perpendicular to the sweep
    direction.  A polygon narrower than one spacing gets a single pass
    through its middle.
    """
    if not spacing > 0:
        raise CoverageError("spacing must be positive")
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[0] < 3 or verts.shape[1] != 2:
        raise CoverageError("polygon needs at least 3 two-dimensional vertices")
    poly = Polygon(verts)
    if not poly.is_valid or poly.area <= 0:
        raise CoverageError("polygon must be simple with positive area")
    theta = sweep_angle(verts)
    rot = _rotation(-theta)  # sweep direction becomes +x
    flat = Polygon(verts @ rot.T)
    xmin, ymin, xmax, ymax = flat.bounds
    offsets = []
    y = ymin + spacing / 2.0
    while y < ymax:
        offsets.append(y)
        y += spacing
    if not offsets:
        offsets = [0.5 * (ymin + ymax)]
    unrot = _rotation(theta)
    rows: list[list[tuple[np.ndarray, np.ndarray]]] = []
    for k, y in enumerate(offsets):
        cut = flat.intersection(LineString([(xmin - 1.0, y), (xmax + 1.0, y)]))
        if isinstance(cut, LineString):
            parts = [cut] if cut.length > MIN_PASS_LENGTH else []
        elif isinstance(cut, MultiLineString):
            parts = [g for g in cut.geoms if g.length > MIN_PASS_LENGTH]
        else:
            parts = [
                g
                for g in getattr(cut, "geoms", [])
                if isinstance(g, LineString) and g.length > MIN_PASS_LENGTH
            ]
        if not parts:
            continue
        segs = []
        for part in parts:
            xs = [p[0] for p in part.coords]
            a = np.array([min(xs), y])
            b = np.array([max(xs), y])
            segs.append((a, b))
        segs.sort(key=lambda s: s[0][0])
        if len(rows) % 2 == 1:  # parity over emitted rows keeps turns short
            segs = [(b, a) for a, b in reversed(segs)]
        rows.append([(unrot @ a, unrot @ b) for a, b in segs])
    return rows


def row_length(row: list[tuple[np.ndarray, np.ndarray]]) -> float:
    return float(sum(np.linalg.norm(b - a) for a, b in row))


def partition_rows(lengths: Sequence[float], n: int) -> list[tuple[int, int]]:
    """Split row indices into n contiguous [start, end) blocks, greedily
    keeping total lengths balanced.  Trailing blocks may be empty when
    there are more drones than rows."""
    if n < 1:
        raise CoverageError("need at least one drone")
    blocks: list[tuple[int, int]] = []
    i = 0
    for d in range(n):
        drones_left = n - d
        rows_left = len(lengths) - i
        if rows_left <= 0:
            blocks.append((i, i))
            continue
        if drones_left == 1:
            blocks.append((i, len(lengths)))
            i = len(lengths)
            continue
        target = float(sum(lengths[i:])) / drones_left
        # leave later drones one row each at most; extras run out at the tail
        last_start = max(i + 1, len(lengths) - (drones_left - 1))
        j = i
        acc = 0.0
        while j < last_start:
            # stop on whichever side of the target is closer; ties stop short
            if j > i and abs(acc + lengths[j] - target) >= abs(acc - target):
                break
            acc += lengths[j]
            j += 1
        blocks.append((i, j))
        i = j
    return blocks


def plan_coverage(
    polygon: Sequence[GeoPoint],
    spacing: float,
    drones: Sequence[str],
    origin: GeoOrigin | GeoPoint,
    config: CoveragePlanConfig | None = None,
) -> MissionDocument:
    """Mission document sweeping the polygon with the given drones."""
    cfg = config or CoveragePlanConfig()
    cfg.check()
    if len(polygon) < 3:
        raise CoverageError("polygon needs at least 3 vertices")
    if not drones:
        raise CoverageError("need at least one drone")
    if len(set(drones)) != len(drones):
        raise CoverageError("duplicate drone namespaces")
    verts = np.array([geo_to_enu(gp, origin)[:2] for gp in polygon])
    rows = sweep_rows(verts, spacing)
    blocks = partition_rows([row_length(r) for r in rows], len(drones))
    doc: dict = {"version": 1, "name": "polygon coverage", "drones": {}}
    shared_start = len(drones) > 1
    for ns, (lo, hi) in zip(drones, blocks):
        waypoints: list[list[float]] = []
        for row in rows[lo:hi]:
            for a, b in row:
                for p in (a, b):
                    gp = enu_to_geo(np.array([p[0], p[1], cfg.altitude]), origin)
                    waypoints.append([gp.latitude, gp.longitude, gp.altitude])
        items: list[dict] = [
            {"id": "arm", "kind": "behavior", "name": "arm"},
            {"id": "offboard", "kind": "behavior", "name": "offboard"},
            {
                "id": "takeoff",
                "kind": "behavior",
                "name": "takeoff",
                "args": {"height": cfg.altitude, "speed": cfg.takeoff_speed},
            },
        ]
        if shared_start:
            items.append({"id": "sync_start", "kind": "barrier", "label": "coverage_start"})
        if waypoints:
            items.append(
                {
                    "id": "sweep",
                    "kind": "behavior",
                    "name": "follow_path",
                    "args": {"points": waypoints, "speed": cfg.flight_speed, "frame_id": "wgs84"},
                }
            )
        items.append({"id": "land", "kind": "behavior", "name": "land", "args": {"speed": cfg.land_speed}})
        items.append({"id": "end", "kind": "end"})
        doc["drones"][ns] = items
    return MissionDocument.from_json(doc)
