"""Lockstep area-coverage session: plan a boustrophedon sweep of a
rectangular field for two GPS-estimated drones, fly it, and report
swath coverage, workload balance, and tracking deviation.
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from aeroswarm.analysis import FlightTrail, polyline_deviation_rms
from aeroswarm.coverage import CoveragePlanConfig, plan_coverage
from aeroswarm.geodesy import enu_to_geo, geo_to_enu
from aeroswarm.msgs import GeoPoint
from aeroswarm.stack import StackConfig, SwarmStack

DEFAULT_CONFIG = os.path.join(os.path.dirname(__file__), "..", "configs", "coverage_scenario.json")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=DEFAULT_CONFIG)
    parser.add_argument("--width", type=float, default=90.0)
    parser.add_argument("--depth", type=float, default=50.0)
    parser.add_argument("--spacing", type=float, default=5.0)
    parser.add_argument("--altitude", type=float, default=10.0)
    parser.add_argument("--speed", type=float, default=5.0)
    args = parser.parse_args(argv)

    config = StackConfig.from_file(args.config)
    stack = SwarmStack(config)
    origin = config.world.origin
    trails = {ns: FlightTrail(stack.bus, ns) for ns in stack.drone_names}

    # Rectangle with its south-west corner 10 m east/north of the homes.
    x0, y0 = 10.0, 10.0
    corners_enu = [
        (x0, y0, 0.0),
        (x0 + args.width, y0, 0.0),
        (x0 + args.width, y0 + args.depth, 0.0),
        (x0, y0 + args.depth, 0.0),
    ]
    polygon = [enu_to_geo(c, origin) for c in corners_enu]
    plan_cfg = CoveragePlanConfig(altitude=args.altitude, flight_speed=args.speed)
    doc = plan_coverage(polygon, args.spacing, stack.drone_names, origin, plan_cfg)

    runner = stack.add_mission(doc, label="coverage")
    runner.start()
    if not stack.bus.run_until(lambda: runner.finished, timeout_s=1200.0):
        print("mission did not finish within simulated timeout")
        return 1
    report = runner.report()
    print(f"mission {report['state']} at t={report['finished_t'] / 1e9:.2f}s")
    if report["state"] != "DONE":
        print(f"  diagnostic: {report['diagnostic']}")
        for ns, drone_report in report["drones"].items():
            print(f"  {ns}: {drone_report['state']} ({drone_report['reason']})")
            for item in drone_report["items"]:
                print(f"    {item['id']:12s} {item['result']:8s} {item['reason']}")
        return 1

    lengths = {}
    for ns in stack.drone_names:
        sweep = next(item for item in doc.drones[ns] if item.id == "sweep")
        waypoints = np.array([geo_to_enu(GeoPoint(*p), origin) for p in sweep.args["points"]])
        lengths[ns] = float(np.sum(np.linalg.norm(np.diff(waypoints, axis=0), axis=1)))

        drone_report = report["drones"][ns]
        item_report = next(i for i in drone_report["items"] if i["id"] == sweep.id)
        trail = trails[ns]
        t = trail.times_s()
        mask = (t >= item_report["start_t"] / 1e9) & (t <= item_report["end_t"] / 1e9)
        flown = trail.positions()[mask]
        planned = np.vstack([flown[:1], waypoints])
        rms = polyline_deviation_rms(flown, planned)
        print(f"  {ns}: sweep length {lengths[ns]:8.1f} m, tracking RMS {rms:.3f} m")

    hi, lo = max(lengths.values()), min(lengths.values())
    print(f"  balance: max/min sweep length {hi / lo:.3f}")

    # Swath union versus the polygon, on a coarse grid.
    from scipy.spatial import cKDTree

    cell = 0.1
    xs = np.arange(x0, x0 + args.width + cell, cell)
    ys = np.arange(y0, y0 + args.depth + cell, cell)
    gx, gy = np.meshgrid(xs, ys)
    cells = np.stack([gx.ravel(), gy.ravel()], axis=1)
    pts = np.vstack([trails[ns].positions()[:, :2] for ns in stack.drone_names])
    dist, _ = cKDTree(pts).query(cells, distance_upper_bound=args.spacing / 2.0)
    print(f"  swath covers {np.isfinite(dist).mean() * 100.0:.2f}% of the field (cell {cell} m)")
    return 0 if report["state"] == "DONE" else 1


if __name__ == "__main__":
    raise SystemExit(main())
