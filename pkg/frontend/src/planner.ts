// Coverage planning workflow: sketch a polygon on the map, ask the service
// for a plan, and preview the routes before anything is uploaded.
import type { GcsApi } from "./api.js";
import { enuToGeo, geoToEnu, type Vec3 } from "./geodesy.js";
import type { GeoPointJson, MissionDocumentJson } from "./types.js";

export const ROUTE_COLORS = ["#1E90FF", "#FF1493", "#32CD32", "#FF8C00", "#4B0082"];

export interface RoutePreview {
  ns: string;
  color: string;
  lengthM: number;
  pointsEnu: Vec3[];
}

export interface PlanPreview {
  doc: MissionDocumentJson;
  spacing: number;
  routes: RoutePreview[];
}

export class PolygonDraft {
  vertices: [number, number][] = [];

  add(east: number, north: number): void {
    this.vertices.push([east, north]);
  }

  clear(): void {
    this.vertices = [];
  }

  // Planning needs an actual area, not a point or a segment.
  get ready(): boolean {
    return this.vertices.length >= 3;
  }
}

export interface PlanOptions {
  spacing: number;
  drones: string[];
  altitude?: number;
  flightSpeed?: number;
}

export function draftToPolygon(draft: PolygonDraft, origin: GeoPointJson): GeoPointJson[] {
  return draft.vertices.map(([e, n]) => enuToGeo([e, n, 0.0], origin));
}

function pathLength(points: Vec3[]): number {
  let total = 0.0;
  for (let i = 1; i < points.length; i += 1) {
    total += Math.hypot(
      points[i][0] - points[i - 1][0],
      points[i][1] - points[i - 1][1],
      points[i][2] - points[i - 1][2],
    );
  }
  return total;
}

// Pull each drone's swept path out of a planned document and express it in
// local ENU for drawing and length readouts.
export function decodePlan(
  doc: MissionDocumentJson,
  origin: GeoPointJson,
  spacing: number,
): PlanPreview {
  const routes: RoutePreview[] = [];
  for (const [ns, items] of Object.entries(doc.drones)) {
    const sweep = items.find((item) => item.kind === "behavior" && item.name === "follow_path");
    if (sweep === undefined || sweep.args === undefined) continue;
    const raw = sweep.args.points as [number, number, number][];
    const pointsEnu = raw.map(([latitude, longitude, altitude]) =>
      geoToEnu({ latitude, longitude, altitude }, origin),
    );
    routes.push({
      ns,
      color: ROUTE_COLORS[routes.length % ROUTE_COLORS.length],
      lengthM: pathLength(pointsEnu),
      pointsEnu,
    });
  }
  return { doc, spacing, routes };
}

export async function requestPlan(
  api: GcsApi,
  origin: GeoPointJson,
  draft: PolygonDraft,
  options: PlanOptions,
): Promise<PlanPreview> {
  if (!draft.ready) throw new Error("polygon needs at least 3 vertices");
  const doc = await api.planCoverage({
    polygon: draftToPolygon(draft, origin),
    spacing: options.spacing,
    drones: options.drones,
    altitude: options.altitude,
    flight_speed: options.flightSpeed,
  });
  return decodePlan(doc, origin, options.spacing);
}
