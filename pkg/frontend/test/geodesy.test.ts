import { describe, expect, it } from "vitest";
import { ecefToGeodetic, enuToGeo, geoToEnu, geodeticToEcef } from "../src/geodesy.js";
import type { GeoPointJson } from "../src/types.js";

const ORIGIN: GeoPointJson = { latitude: 40.0, longitude: -3.0, altitude: 650.0 };

// Values produced by the onboard stack's converter; the browser port must
// agree so routes and telemetry share one frame.
const ENU_TO_GEO_CASES: [[number, number, number], GeoPointJson][] = [
  [
    [100.0, 50.0, 10.0],
    { latitude: 40.000450257306866, longitude: -2.9988290688834245, altitude: 660.0009791878983 },
  ],
  [
    [10.0, 10.0, 0.0],
    { latitude: 40.000090052729554, longitude: -2.9998829073202846, altitude: 650.0000156471506 },
  ],
  [
    [-2500.0, 4800.0, -30.0],
    { latitude: 40.043221670415285, longitude: -3.0292917362189016, altitude: 622.2998505374417 },
  ],
];

describe("geodesy", () => {
  it("matches the onboard converter on fixed cases", () => {
    for (const [enu, geo] of ENU_TO_GEO_CASES) {
      const got = enuToGeo(enu, ORIGIN);
      expect(got.latitude).toBeCloseTo(geo.latitude, 9);
      expect(got.longitude).toBeCloseTo(geo.longitude, 9);
      expect(got.altitude).toBeCloseTo(geo.altitude, 5);
    }
    const enu = geoToEnu({ latitude: 40.001, longitude: -2.999, altitude: 700.0 }, ORIGIN);
    expect(enu[0]).toBeCloseTo(85.40197013167806, 6);
    expect(enu[1]).toBeCloseTo(111.04733853637329, 6);
    expect(enu[2]).toBeCloseTo(49.99846002174257, 6);
  });

  it("round trips geodetic through ecef to sub-millimeter", () => {
    const points: GeoPointJson[] = [
      { latitude: 40.0, longitude: -3.0, altitude: 650.0 },
      { latitude: -33.45, longitude: 151.2, altitude: 12.0 },
      { latitude: 78.9, longitude: -42.1, altitude: 3000.0 },
      { latitude: 0.0, longitude: 0.0, altitude: 0.0 },
    ];
    for (const p of points) {
      const back = ecefToGeodetic(geodeticToEcef(p));
      expect(back.latitude).toBeCloseTo(p.latitude, 9);
      expect(back.longitude).toBeCloseTo(p.longitude, 9);
      expect(back.altitude).toBeCloseTo(p.altitude, 4);
    }
  });

  it("round trips enu within 10 km of the origin", () => {
    for (let k = 0; k < 50; k += 1) {
      const enu: [number, number, number] = [
        ((k * 997) % 20000) - 10000,
        ((k * 1499) % 20000) - 10000,
        ((k * 83) % 600) - 300,
      ];
      const back = geoToEnu(enuToGeo(enu, ORIGIN), ORIGIN);
      expect(back[0]).toBeCloseTo(enu[0], 3);
      expect(back[1]).toBeCloseTo(enu[1], 3);
      expect(back[2]).toBeCloseTo(enu[2], 3);
    }
  });

  it("keeps east pointing along increasing longitude", () => {
    const east = enuToGeo([1000.0, 0.0, 0.0], ORIGIN);
    expect(east.longitude).toBeGreaterThan(ORIGIN.longitude);
    expect(Math.abs(east.latitude - ORIGIN.latitude)).toBeLessThan(1e-4);
    const north = enuToGeo([0.0, 1000.0, 0.0], ORIGIN);
    expect(north.latitude).toBeGreaterThan(ORIGIN.latitude);
  });
});
