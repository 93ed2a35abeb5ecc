// WGS84 geodetic <-> local ENU conversions, matching the onboard stack
// bit-for-bit so plotted routes line up with telemetry.
import type { GeoPointJson } from "./types.js";

const WGS84_A = 6378137.0;
const WGS84_F = 1.0 / 298.257223563;
const WGS84_E2 = WGS84_F * (2.0 - WGS84_F);

const DEG = Math.PI / 180.0;

export type Vec3 = [number, number, number];

function primeVerticalRadius(sinLat: number): number {
  return WGS84_A / Math.sqrt(1.0 - WGS84_E2 * sinLat * sinLat);
}

export function geodeticToEcef(p: GeoPointJson): Vec3 {
  const lat = p.latitude * DEG;
  const lon = p.longitude * DEG;
  const sinLat = Math.sin(lat);
  const cosLat = Math.cos(lat);
  const n = primeVerticalRadius(sinLat);
  return [
    (n + p.altitude) * cosLat * Math.cos(lon),
    (n + p.altitude) * cosLat * Math.sin(lon),
    (n * (1.0 - WGS84_E2) + p.altitude) * sinLat,
  ];
}

export function ecefToGeodetic(xyz: Vec3): GeoPointJson {
  const [x, y, z] = xyz;
  const lon = Math.atan2(y, x);
  const rho = Math.hypot(x, y);
  let lat = Math.atan2(z, rho * (1.0 - WGS84_E2));
  let alt = 0.0;
  // Bowring-style fixed point; converges in a handful of iterations.
  for (let i = 0; i < 10; i += 1) {
    const sinLat = Math.sin(lat);
    const n = primeVerticalRadius(sinLat);
    alt = Math.abs(lat) < 1.4 ? rho / Math.cos(lat) - n : z / sinLat - n * (1.0 - WGS84_E2);
    const next = Math.atan2(z, rho * (1.0 - WGS84_E2 * (n / (n + alt))));
    const delta = Math.abs(next - lat);
    lat = next;
    if (delta < 1e-14) break;
  }
  return { latitude: lat / DEG, longitude: lon / DEG, altitude: alt };
}

// Rows: east, north, up unit vectors of the tangent plane in ECEF.
function enuRotation(origin: GeoPointJson): number[][] {
  const lat = origin.latitude * DEG;
  const lon = origin.longitude * DEG;
  const sinLat = Math.sin(lat);
  const cosLat = Math.cos(lat);
  const sinLon = Math.sin(lon);
  const cosLon = Math.cos(lon);
  return [
    [-sinLon, cosLon, 0.0],
    [-sinLat * cosLon, -sinLat * sinLon, cosLat],
    [cosLat * cosLon, cosLat * sinLon, sinLat],
  ];
}

export function geoToEnu(p: GeoPointJson, origin: GeoPointJson): Vec3 {
  const r = enuRotation(origin);
  const po = geodeticToEcef(origin);
  const pe = geodeticToEcef(p);
  const d = [pe[0] - po[0], pe[1] - po[1], pe[2] - po[2]];
  return [
    r[0][0] * d[0] + r[0][1] * d[1] + r[0][2] * d[2],
    r[1][0] * d[0] + r[1][1] * d[1] + r[1][2] * d[2],
    r[2][0] * d[0] + r[2][1] * d[1] + r[2][2] * d[2],
  ];
}

export function enuToGeo(v: Vec3, origin: GeoPointJson): GeoPointJson {
  const r = enuRotation(origin);
  const po = geodeticToEcef(origin);
  // R is orthonormal, so the inverse map is R^T v.
  return ecefToGeodetic([
    po[0] + r[0][0] * v[0] + r[1][0] * v[1] + r[2][0] * v[2],
    po[1] + r[0][1] * v[0] + r[1][1] * v[1] + r[2][1] * v[2],
    po[2] + r[0][2] * v[0] + r[1][2] * v[1] + r[2][2] * v[2],
  ]);
}
