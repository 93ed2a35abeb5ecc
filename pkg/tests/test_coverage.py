"""Coverage planner tests.

Sweep geometry is checked against hand-computed row offsets, a
rotation-invariance property, and the rasterized swath-union oracle in
conftest.  Partitioning is checked against exact block arithmetic, and
the emitted mission documents against the schema validator plus a
geodetic round trip back to the planar rows.
"""

import math

import numpy as np
import pytest
from conftest import coverage_fraction

from aeroswarm.coverage import (
    CoverageError,
    CoveragePlanConfig,
    partition_rows,
    plan_coverage,
    row_length,
    sweep_angle,
    sweep_rows,
)
from aeroswarm.geodesy import geo_to_enu
from aeroswarm.mission import validate_document
from aeroswarm.msgs import GeoPoint

RECT_10 = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]])
ORIGIN = GeoPoint(40.0, -3.0, 650.0)


def flatten(rows):
    return [seg for row in rows for seg in row]


def rect(w, h):
    return np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])


# --- sweep geometry ----------------------------------------------------------------


def test_square_rows_sit_at_half_spacing_offsets():
    rows = sweep_rows(RECT_10, 5.0)
    assert len(rows) == 2
    (a0, b0), = rows[0]
    (a1, b1), = rows[1]
    np.testing.assert_allclose([a0, b0], [[0.0, 2.5], [10.0, 2.5]], atol=1e-9)
    # serpentine: second row runs back the other way at 7.5
    np.testing.assert_allclose([a1, b1], [[10.0, 7.5], [0.0, 7.5]], atol=1e-9)


def test_narrow_polygon_gets_single_middle_pass():
    rows = sweep_rows(rect(10.0, 2.0), 5.0)
    assert len(rows) == 1
    (a, b), = rows[0]
    assert a[1] == pytest.approx(1.0)
    assert b[1] == pytest.approx(1.0)
    assert row_length(rows[0]) == pytest.approx(10.0)


def test_sweep_angle_follows_longest_edge():
    assert sweep_angle(rect(20.0, 10.0)) == pytest.approx(0.0)
    # rotate so the long edge sits at 0.4 rad
    theta = 0.4
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    assert sweep_angle(rect(20.0, 10.0) @ rot.T) == pytest.approx(theta)
    # square ties resolve toward east
    assert sweep_angle(RECT_10 @ rot.T) == pytest.approx(theta)
    with pytest.raises(CoverageError, match="degenerate"):
        sweep_angle(np.zeros((3, 2)))


def test_sweep_angle_is_stable_against_vertex_noise():
    """A nominally horizontal edge must read as angle 0 whether numerical
    noise tips its slope up or down; the wrap at pi is the same axis."""
    for eps in (1e-12, -1e-12):
        noisy = rect(20.0, 10.0).astype(float)
        noisy[1, 1] += eps
        assert sweep_angle(noisy) == pytest.approx(0.0, abs=1e-9)
        rows = sweep_rows(noisy, 5.0)
        ref = sweep_rows(rect(20.0, 10.0), 5.0)
        for row, rref in zip(rows, ref):
            for (a, b), (ra, rb) in zip(row, rref):
                np.testing.assert_allclose(a, ra, atol=1e-9)
                np.testing.assert_allclose(b, rb, atol=1e-9)


def test_rows_rotate_with_the_polygon():
    base = sweep_rows(rect(20.0, 10.0), 5.0)
    for theta in (0.3, 1.1, 2.5):
        c, s = math.cos(theta), math.sin(theta)
        rot = np.array([[c, -s], [s, c]])
        rows = sweep_rows(rect(20.0, 10.0) @ rot.T, 5.0)
        assert len(rows) == len(base) == 2
        for row, ref in zip(rows, base):
            assert row_length(row) == pytest.approx(row_length(ref), abs=1e-6)
            for (a, b), (ra, rb) in zip(row, ref):
                np.testing.assert_allclose(a, rot @ ra, atol=1e-6)
                np.testing.assert_allclose(b, rot @ rb, atol=1e-6)


def test_concave_polygon_rows_split_into_segments():
    # 40 x 32 rectangle with a notch cut from the top between x = 16 and 24
    verts = np.array([
        [0.0, 0.0], [40.0, 0.0], [40.0, 32.0], [24.0, 32.0],
        [24.0, 12.0], [16.0, 12.0], [16.0, 32.0], [0.0, 32.0],
    ])
    rows = sweep_rows(verts, 4.0)
    assert len(rows) == 8
    for k, row in enumerate(rows):
        if k < 3:  # below the notch the pass crosses the full width
            assert len(row) == 1
            assert row_length(row) == pytest.approx(40.0)
        else:  # above it the pass splits into the two arms
            assert len(row) == 2
            assert row_length(row) == pytest.approx(32.0)
    # swath union still covers the whole polygon
    frac = coverage_fraction(verts, flatten(rows), radius=2.0, cell=0.1)
    assert frac >= 0.99


def test_swath_union_covers_matched_rectangle():
    rows = sweep_rows(rect(90.0, 50.0), 5.0)
    assert len(rows) == 10
    frac = coverage_fraction(rect(90.0, 50.0), flatten(rows), radius=2.5, cell=0.1)
    assert frac == pytest.approx(1.0)


def test_sweep_rows_rejects_bad_input():
    with pytest.raises(CoverageError, match="spacing"):
        sweep_rows(RECT_10, 0.0)
    with pytest.raises(CoverageError, match="3"):
        sweep_rows(np.array([[0.0, 0.0], [1.0, 0.0]]), 1.0)
    bowtie = np.array([[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 2.0]])
    with pytest.raises(CoverageError, match="simple"):
        sweep_rows(bowtie, 1.0)


# --- partitioning ------------------------------------------------------------------


def test_partition_balances_equal_rows():
    assert partition_rows([10.0] * 4, 2) == [(0, 2), (2, 4)]
    assert partition_rows([10.0] * 6, 3) == [(0, 2), (2, 4), (4, 6)]
    assert partition_rows([10.0] * 5, 1) == [(0, 5)]


def test_partition_stops_on_the_closer_side_of_target():
    # target 11.5: taking the second row lands at 20 (off by 8.5), stopping
    # at 10 is closer (off by 1.5)
    assert partition_rows([10.0, 10.0, 3.0], 2) == [(0, 1), (1, 3)]
    # exact tie between stopping and taking stops short
    assert partition_rows([6.0, 4.0, 6.0], 2) == [(0, 1), (1, 3)]
    # overshoot taken when it is the closer side: target 18, taking the
    # second row lands at 20 (off by 2) versus stopping at 10 (off by 8)
    assert partition_rows([10.0, 10.0, 16.0], 2) == [(0, 2), (2, 3)]


def test_partition_extra_drones_get_trailing_empty_blocks():
    assert partition_rows([10.0], 3) == [(0, 1), (1, 1), (1, 1)]
    assert partition_rows([10.0, 10.0], 3) == [(0, 1), (1, 2), (2, 2)]
    assert partition_rows([], 2) == [(0, 0), (0, 0)]
    with pytest.raises(CoverageError):
        partition_rows([1.0], 0)


def test_partition_blocks_are_contiguous_and_cover_all_rows():
    rng = np.random.RandomState(7)
    for _ in range(200):
        n_rows = rng.randint(0, 30)
        n = rng.randint(1, 6)
        lengths = rng.uniform(1.0, 50.0, size=n_rows).tolist()
        blocks = partition_rows(lengths, n)
        assert len(blocks) == n
        assert blocks[0][0] == 0
        assert blocks[-1][1] == n_rows
        for (a0, a1), (b0, b1) in zip(blocks, blocks[1:]):
            assert a1 == b0
            assert a0 <= a1 and b0 <= b1
        if n_rows >= n:
            assert all(hi > lo for lo, hi in blocks)


# --- mission emission --------------------------------------------------------------


def geo_rect(w, h, origin=ORIGIN):
    from aeroswarm.geodesy import enu_to_geo

    return [enu_to_geo(np.array([x, y, 0.0]), origin) for x, y in rect(w, h)]


def test_plan_structure_two_drones():
    doc = plan_coverage(geo_rect(90.0, 50.0), 5.0, ["uav1", "uav2"], ORIGIN,
                        CoveragePlanConfig(altitude=3.0, flight_speed=2.0))
    assert validate_document(doc.to_json()) == []
    assert doc.name == "polygon coverage"
    for ns in ("uav1", "uav2"):
        items = doc.drones[ns]
        assert [i.id for i in items] == ["arm", "offboard", "takeoff", "sync_start", "sweep", "land", "end"]
        barrier = items[3]
        assert barrier.kind == "barrier" and barrier.label == "coverage_start"
        takeoff = items[2]
        assert takeoff.args == {"height": 3.0, "speed": 1.0}
        sweep = items[4]
        assert sweep.name == "follow_path"
        assert sweep.args["frame_id"] == "wgs84"
        assert sweep.args["speed"] == 2.0
        # even count: two endpoints per pass segment
        assert len(sweep.args["points"]) % 2 == 0


def test_plan_single_drone_has_no_barrier():
    doc = plan_coverage(geo_rect(30.0, 10.0), 5.0, ["solo"], ORIGIN)
    items = doc.drones["solo"]
    assert [i.id for i in items] == ["arm", "offboard", "takeoff", "sweep", "land", "end"]


def enu_points(sweep_args, origin=ORIGIN):
    return np.array([
        geo_to_enu(GeoPoint(lat, lon, alt), origin) for lat, lon, alt in sweep_args["points"]
    ])


def test_plan_waypoints_round_trip_to_planar_rows():
    doc = plan_coverage(geo_rect(90.0, 50.0), 5.0, ["uav1", "uav2"], ORIGIN,
                        CoveragePlanConfig(altitude=3.0))
    rows = sweep_rows(rect(90.0, 50.0), 5.0)
    expected = [p for row in rows for a, b in row for p in (a, b)]
    got = np.vstack([enu_points(doc.drones[ns][4].args) for ns in ("uav1", "uav2")])
    assert got.shape == (len(expected), 3)
    np.testing.assert_allclose(got[:, 2], 3.0, atol=1e-6)
    np.testing.assert_allclose(got[:, :2], np.array(expected), atol=1e-6)


def test_plan_waypoints_stay_inside_polygon_and_balance_lengths():
    from shapely.geometry import Point, Polygon

    doc = plan_coverage(geo_rect(90.0, 50.0), 5.0, ["uav1", "uav2"], ORIGIN)
    hull = Polygon(rect(90.0, 50.0)).buffer(1e-6)
    lengths = {}
    segments = []
    for ns in ("uav1", "uav2"):
        pts = enu_points(doc.drones[ns][4].args)
        assert all(hull.contains(Point(p[0], p[1])) for p in pts)
        # length of the swept passes only, skipping inter-row transits
        lengths[ns] = sum(
            float(np.linalg.norm(pts[k + 1, :2] - pts[k, :2])) for k in range(0, len(pts) - 1, 2)
        )
        segments += [(pts[k, :2], pts[k + 1, :2]) for k in range(0, len(pts) - 1, 2)]
    total = sum(lengths.values())
    assert abs(lengths["uav1"] - lengths["uav2"]) <= 0.2 * max(lengths.values())
    assert total == pytest.approx(10 * 90.0)
    assert coverage_fraction(rect(90.0, 50.0), segments, radius=2.5, cell=0.1) >= 0.99


def test_plan_transitions_between_consecutive_rows_stay_short():
    doc = plan_coverage(geo_rect(90.0, 50.0), 5.0, ["solo"], ORIGIN)
    pts = enu_points(doc.drones["solo"][3].args)
    # serpentine ordering: the hop from one row to the next is one spacing
    for k in range(1, len(pts) - 1, 2):
        assert np.linalg.norm(pts[k + 1, :2] - pts[k, :2]) == pytest.approx(5.0, abs=1e-6)


def test_plan_rejects_bad_requests():
    with pytest.raises(CoverageError, match="positive"):
        plan_coverage(geo_rect(10.0, 10.0), 5.0, ["a", "b"], ORIGIN,
                      CoveragePlanConfig(altitude=0.0))
    with pytest.raises(CoverageError, match="3 vertices"):
        plan_coverage(geo_rect(10.0, 10.0)[:2], 5.0, ["a"], ORIGIN)
    with pytest.raises(CoverageError, match="duplicate"):
        plan_coverage(geo_rect(10.0, 10.0), 5.0, ["a", "a"], ORIGIN)
    with pytest.raises(CoverageError, match="drone"):
        plan_coverage(geo_rect(10.0, 10.0), 5.0, [], ORIGIN)


def test_extra_drone_plan_still_validates():
    # one pass, two drones: the second carries no sweep item
    doc = plan_coverage(geo_rect(10.0, 2.0), 5.0, ["a", "b"], ORIGIN)
    assert validate_document(doc.to_json()) == []
    assert any(i.id == "sweep" for i in doc.drones["a"])
    assert not any(i.id == "sweep" for i in doc.drones["b"])
