// 2D plan view: east right, north up, meters everywhere. Rendering goes
// through a narrow context interface so tests can record draw calls.
import type { WorldObjectJson } from "./types.js";

export interface Viewport {
  centerE: number;
  centerN: number;
  scale: number; // pixels per meter
  width: number;
  height: number;
}

export interface Draw2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  setLineDash(segments: number[]): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fillText(text: string, x: number, y: number): void;
}

export interface DroneMark {
  ns: string;
  east: number;
  north: number;
  yawRad: number;
  color: string;
}

export interface RouteLine {
  color: string;
  points: [number, number][]; // ENU east/north
}

export interface SceneContent {
  objects: WorldObjectJson[];
  drones: DroneMark[];
  trails: RouteLine[];
  routes: RouteLine[];
  draft: [number, number][];
}

export function worldToScreen(east: number, north: number, vp: Viewport): [number, number] {
  // Screen y grows downward, north grows upward.
  return [
    vp.width / 2 + (east - vp.centerE) * vp.scale,
    vp.height / 2 - (north - vp.centerN) * vp.scale,
  ];
}

export function screenToWorld(px: number, py: number, vp: Viewport): [number, number] {
  return [
    vp.centerE + (px - vp.width / 2) / vp.scale,
    vp.centerN - (py - vp.height / 2) / vp.scale,
  ];
}

export function fitViewport(
  points: [number, number][],
  width: number,
  height: number,
  marginPx = 40,
): Viewport {
  if (points.length === 0) return { centerE: 0, centerN: 0, scale: 5.0, width, height };
  let minE = Infinity;
  let maxE = -Infinity;
  let minN = Infinity;
  let maxN = -Infinity;
  for (const [e, n] of points) {
    minE = Math.min(minE, e);
    maxE = Math.max(maxE, e);
    minN = Math.min(minN, n);
    maxN = Math.max(maxN, n);
  }
  const spanE = Math.max(maxE - minE, 1.0);
  const spanN = Math.max(maxN - minN, 1.0);
  const scale = Math.min((width - 2 * marginPx) / spanE, (height - 2 * marginPx) / spanN);
  return {
    centerE: (minE + maxE) / 2,
    centerN: (minN + maxN) / 2,
    scale,
    width,
    height,
  };
}

// [w, x, y, z] unit quaternion to heading about +z.
export function quatYaw(q: number[]): number {
  const [w, x, y, z] = q;
  return Math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
}

function gridStep(scale: number): number {
  for (const step of [1, 2, 5, 10, 20, 50, 100, 200, 500]) {
    if (step * scale >= 40) return step;
  }
  return 1000;
}

function drawPolyline(ctx: Draw2D, vp: Viewport, line: RouteLine, width: number): void {
  if (line.points.length < 2) return;
  ctx.strokeStyle = line.color;
  ctx.lineWidth = width;
  ctx.beginPath();
  const [sx, sy] = worldToScreen(line.points[0][0], line.points[0][1], vp);
  ctx.moveTo(sx, sy);
  for (let i = 1; i < line.points.length; i += 1) {
    const [px, py] = worldToScreen(line.points[i][0], line.points[i][1], vp);
    ctx.lineTo(px, py);
  }
  ctx.stroke();
}

function drawGrid(ctx: Draw2D, vp: Viewport): void {
  const step = gridStep(vp.scale);
  const [minE, maxN] = screenToWorld(0, 0, vp);
  const [maxE, minN] = screenToWorld(vp.width, vp.height, vp);
  ctx.strokeStyle = "#e3e6ea";
  ctx.lineWidth = 1;
  ctx.fillStyle = "#9aa0a6";
  ctx.font = "10px sans-serif";
  for (let e = Math.ceil(minE / step) * step; e <= maxE; e += step) {
    const [px] = worldToScreen(e, 0, vp);
    ctx.beginPath();
    ctx.moveTo(px, 0);
    ctx.lineTo(px, vp.height);
    ctx.stroke();
    ctx.fillText(`${e}`, px + 2, vp.height - 4);
  }
  for (let n = Math.ceil(minN / step) * step; n <= maxN; n += step) {
    const [, py] = worldToScreen(0, n, vp);
    ctx.beginPath();
    ctx.moveTo(0, py);
    ctx.lineTo(vp.width, py);
    ctx.stroke();
    ctx.fillText(`${n}`, 4, py - 2);
  }
}

function drawObjects(ctx: Draw2D, vp: Viewport, objects: WorldObjectJson[]): void {
  for (const obj of objects) {
    const [px, py] = worldToScreen(obj.position[0], obj.position[1], vp);
    const yaw = (obj.yaw_deg * Math.PI) / 180.0;
    // Bar across the object's heading, e.g. a gate seen from above.
    const half = 0.75 * vp.scale;
    ctx.strokeStyle = "#5f6368";
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(px - half * Math.sin(yaw), py - half * Math.cos(yaw));
    ctx.lineTo(px + half * Math.sin(yaw), py + half * Math.cos(yaw));
    ctx.stroke();
    ctx.fillStyle = "#5f6368";
    ctx.font = "11px sans-serif";
    ctx.fillText(obj.name, px + 6, py - 6);
  }
}

function drawDraft(ctx: Draw2D, vp: Viewport, draft: [number, number][]): void {
  if (draft.length === 0) return;
  ctx.setLineDash([6, 4]);
  drawPolyline(ctx, vp, { color: "#d93025", points: draft }, 1.5);
  if (draft.length >= 3) {
    const closing: RouteLine = { color: "#d93025", points: [draft[draft.length - 1], draft[0]] };
    drawPolyline(ctx, vp, closing, 1.5);
  }
  ctx.setLineDash([]);
  ctx.fillStyle = "#d93025";
  for (const [e, n] of draft) {
    const [px, py] = worldToScreen(e, n, vp);
    ctx.beginPath();
    ctx.arc(px, py, 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawDrones(ctx: Draw2D, vp: Viewport, drones: DroneMark[]): void {
  for (const drone of drones) {
    const [px, py] = worldToScreen(drone.east, drone.north, vp);
    // Triangle pointing along yaw (ENU: yaw 0 is +east, CCW positive).
    const r = 8;
    const tips: [number, number][] = [
      [r, 0],
      [-0.6 * r, 0.5 * r],
      [-0.6 * r, -0.5 * r],
    ];
    const cos = Math.cos(drone.yawRad);
    const sin = Math.sin(drone.yawRad);
    ctx.fillStyle = drone.color;
    ctx.beginPath();
    tips.forEach(([tx, ty], i) => {
      const sx = px + tx * cos + ty * sin;
      const sy = py - (tx * sin - ty * cos);
      if (i === 0) ctx.moveTo(sx, sy);
      else ctx.lineTo(sx, sy);
    });
    ctx.closePath();
    ctx.fill();
    ctx.font = "11px sans-serif";
    ctx.fillText(drone.ns, px + 10, py + 4);
  }
}

export function drawScene(ctx: Draw2D, vp: Viewport, content: SceneContent): void {
  ctx.fillStyle = "#fafbfc";
  ctx.fillRect(0, 0, vp.width, vp.height);
  drawGrid(ctx, vp);
  drawObjects(ctx, vp, content.objects);
  for (const trail of content.trails) drawPolyline(ctx, vp, trail, 1);
  for (const route of content.routes) drawPolyline(ctx, vp, route, 2);
  drawDraft(ctx, vp, content.draft);
  drawDrones(ctx, vp, content.drones);
}
