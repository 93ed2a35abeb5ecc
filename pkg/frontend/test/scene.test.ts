import { describe, expect, it } from "vitest";
import {
  drawScene,
  fitViewport,
  quatYaw,
  screenToWorld,
  worldToScreen,
  type Draw2D,
  type SceneContent,
  type Viewport,
} from "../src/scene.js";

const VP: Viewport = { centerE: 50, centerN: 30, scale: 4, width: 800, height: 600 };

// Records every draw call so assertions can check what was drawn where.
class RecordingCtx implements Draw2D {
  fillStyle = "";
  strokeStyle = "";
  lineWidth = 0;
  font = "";
  calls: [string, ...unknown[]][] = [];
  setLineDash(segments: number[]): void {
    this.calls.push(["setLineDash", segments]);
  }
  fillRect(x: number, y: number, w: number, h: number): void {
    this.calls.push(["fillRect", x, y, w, h]);
  }
  beginPath(): void {
    this.calls.push(["beginPath"]);
  }
  moveTo(x: number, y: number): void {
    this.calls.push(["moveTo", x, y, this.strokeStyle]);
  }
  lineTo(x: number, y: number): void {
    this.calls.push(["lineTo", x, y, this.strokeStyle]);
  }
  closePath(): void {
    this.calls.push(["closePath"]);
  }
  stroke(): void {
    this.calls.push(["stroke", this.strokeStyle]);
  }
  fill(): void {
    this.calls.push(["fill", this.fillStyle]);
  }
  arc(x: number, y: number, r: number): void {
    this.calls.push(["arc", x, y, r]);
  }
  fillText(text: string, x: number, y: number): void {
    this.calls.push(["fillText", text, x, y]);
  }
}

describe("viewport transforms", () => {
  it("maps the center to the middle of the canvas", () => {
    expect(worldToScreen(50, 30, VP)).toEqual([400, 300]);
  });

  it("inverts the y axis so north is up", () => {
    const [, above] = worldToScreen(50, 40, VP);
    const [, below] = worldToScreen(50, 20, VP);
    expect(above).toBeLessThan(300);
    expect(below).toBeGreaterThan(300);
  });

  it("round trips world -> screen -> world", () => {
    for (const [e, n] of [
      [0, 0],
      [12.5, -7.25],
      [99, 180],
    ]) {
      const [px, py] = worldToScreen(e, n, VP);
      const [be, bn] = screenToWorld(px, py, VP);
      expect(be).toBeCloseTo(e, 9);
      expect(bn).toBeCloseTo(n, 9);
    }
  });

  it("fits all points inside the canvas with margin", () => {
    const points: [number, number][] = [
      [10, 10],
      [100, 60],
      [55, 35],
    ];
    const vp = fitViewport(points, 800, 600, 40);
    for (const [e, n] of points) {
      const [px, py] = worldToScreen(e, n, vp);
      expect(px).toBeGreaterThanOrEqual(40 - 1e-9);
      expect(px).toBeLessThanOrEqual(760 + 1e-9);
      expect(py).toBeGreaterThanOrEqual(40 - 1e-9);
      expect(py).toBeLessThanOrEqual(560 + 1e-9);
    }
    expect(vp.centerE).toBeCloseTo(55);
    expect(vp.centerN).toBeCloseTo(35);
  });
});

describe("quatYaw", () => {
  it("decodes headings from [w, x, y, z]", () => {
    expect(quatYaw([1, 0, 0, 0])).toBeCloseTo(0);
    const half = Math.PI / 4;
    expect(quatYaw([Math.cos(half), 0, 0, Math.sin(half)])).toBeCloseTo(Math.PI / 2);
    expect(quatYaw([Math.cos(-half), 0, 0, Math.sin(-half)])).toBeCloseTo(-Math.PI / 2);
  });
});

describe("drawScene", () => {
  const content: SceneContent = {
    objects: [{ name: "gate1", position: [2, 0, 1.5], yaw_deg: 90 }],
    drones: [{ ns: "uav1", east: 10, north: 5, yawRad: 0, color: "#1E90FF" }],
    trails: [{ color: "#1E90FF66", points: [[0, 0], [5, 2], [10, 5]] }],
    routes: [{ color: "#FF1493", points: [[10, 10], [100, 10], [100, 15]] }],
    draft: [[0, 0], [20, 0], [20, 20]],
  };

  it("draws each route as a stroked polyline in its color", () => {
    const ctx = new RecordingCtx();
    drawScene(ctx, VP, content);
    const routeLines = ctx.calls.filter((c) => c[0] === "lineTo" && c[3] === "#FF1493");
    expect(routeLines.length).toBe(2);
    const [sx, sy] = worldToScreen(100, 10, VP);
    expect(routeLines[0].slice(1, 3)).toEqual([sx, sy]);
  });

  it("places the drone marker at its telemetry position", () => {
    const ctx = new RecordingCtx();
    drawScene(ctx, VP, content);
    const label = ctx.calls.find((c) => c[0] === "fillText" && c[1] === "uav1");
    expect(label).toBeDefined();
    const [px, py] = worldToScreen(10, 5, VP);
    expect(label![2]).toBeCloseTo(px + 10);
    expect(label![3]).toBeCloseTo(py + 4);
  });

  it("marks every draft vertex", () => {
    const ctx = new RecordingCtx();
    drawScene(ctx, VP, content);
    const dots = ctx.calls.filter((c) => c[0] === "arc");
    expect(dots.length).toBe(content.draft.length);
  });

  it("labels world objects by name", () => {
    const ctx = new RecordingCtx();
    drawScene(ctx, VP, content);
    expect(ctx.calls.some((c) => c[0] === "fillText" && c[1] === "gate1")).toBe(true);
  });
});
