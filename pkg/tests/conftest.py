"""Shared test oracles.

The swath rasterizer here is the reference for area-coverage claims: it
never looks at the planner's internals, only at flown or planned
segments, and counts grid cells of the target polygon whose centers lie
within the sensor radius of any segment.
"""

import numpy as np
import shapely
from shapely.geometry import Polygon


def segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distance from each 2D point to the segment a-b."""
    d = b - a
    denom = float(d @ d)
    if denom == 0.0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ d / denom, 0.0, 1.0)
    closest = a + np.outer(t, d)
    return np.linalg.norm(points - closest, axis=1)


def coverage_fraction(vertices, segments, radius: float, cell: float = 0.1) -> float:
    """Fraction of the polygon's cell centers within radius of any segment.

    `vertices` is the polygon in planar coordinates, `segments` an
    iterable of (a, b) endpoint pairs in the same frame.  Cells are laid
    on a regular grid of pitch `cell` over the polygon's bounding box.
    """
    verts = np.asarray(vertices, dtype=float)
    poly = Polygon(verts)
    xmin, ymin, xmax, ymax = poly.bounds
    xs = np.arange(xmin + cell / 2.0, xmax, cell)
    ys = np.arange(ymin + cell / 2.0, ymax, cell)
    gx, gy = np.meshgrid(xs, ys)
    centers = np.column_stack([gx.ravel(), gy.ravel()])
    inside = shapely.contains_xy(poly, centers[:, 0], centers[:, 1])
    centers = centers[inside]
    if len(centers) == 0:
        raise ValueError("polygon contains no cell centers at this pitch")
    covered = np.zeros(len(centers), dtype=bool)
    for a, b in segments:
        todo = ~covered
        if not todo.any():
            break
        d = segment_distances(centers[todo], np.asarray(a, float)[:2], np.asarray(b, float)[:2])
        covered[todo] = d <= radius
    return float(covered.mean())


def path_segments(points) -> list[tuple[np.ndarray, np.ndarray]]:
    """Consecutive-point segments of a 2D or 3D polyline, xy only."""
    pts = [np.asarray(p, dtype=float)[:2] for p in points]
    return [(pts[k], pts[k + 1]) for k in range(len(pts) - 1)]
