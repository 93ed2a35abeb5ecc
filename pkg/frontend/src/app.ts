// Browser entry point: wires the store, planner and scene to the DOM.
// Module top level stays DOM-free so tests can import the pure helpers.
import { ApiError, GcsApi, type MissionVerb } from "./api.js";
import { PolygonDraft, ROUTE_COLORS, requestPlan, type PlanPreview } from "./planner.js";
import {
  drawScene,
  fitViewport,
  quatYaw,
  screenToWorld,
  type SceneContent,
  type Viewport,
} from "./scene.js";
import { FleetStore } from "./store.js";
import type { MissionReportJson } from "./types.js";

export const REPORT_POLL_MS = 1000;

// Everything the map shows, derived from current state; the drone marks
// come straight from the latest telemetry frame.
export function buildScene(
  store: FleetStore,
  draft: PolygonDraft,
  preview: PlanPreview | null,
): SceneContent {
  const colors = new Map<string, string>();
  store.roster.forEach((entry, i) => colors.set(entry.ns, ROUTE_COLORS[i % ROUTE_COLORS.length]));
  const drones = [];
  for (const [ns, drone] of store.drones) {
    if (drone.pose === null) continue;
    drones.push({
      ns,
      east: drone.pose.position[0],
      north: drone.pose.position[1],
      yawRad: quatYaw(drone.pose.orientation),
      color: colors.get(ns) ?? "#333333",
    });
  }
  return {
    objects: store.world.objects,
    drones,
    trails: [...store.trails.entries()].map(([ns, points]) => ({
      color: (colors.get(ns) ?? "#333333") + "66",
      points,
    })),
    routes:
      preview === null
        ? []
        : preview.routes.map((r) => ({
            color: r.color,
            points: r.pointsEnu.map(([e, n]) => [e, n] as [number, number]),
          })),
    draft: draft.vertices,
  };
}

export function missionButtonStates(state: string | null): Record<MissionVerb, boolean> {
  return {
    start: state === "PENDING",
    pause: state === "RUNNING",
    resume: state === "PAUSED",
    stop: state === "RUNNING" || state === "PAUSED",
  };
}

function progressHtml(report: MissionReportJson): string {
  const rows = Object.entries(report.drones).map(([ns, drone]) => {
    const items = drone.items
      .map((item) => `<li class="item ${item.result}">${item.id}: ${item.result}</li>`)
      .join("");
    return `<div class="drone-report"><b>${ns}</b> (${drone.state})<ul>${items}</ul></div>`;
  });
  return rows.join("");
}

class App {
  private readonly api: GcsApi;
  private store: FleetStore | null = null;
  private readonly draft = new PolygonDraft();
  private preview: PlanPreview | null = null;
  private viewport: Viewport | null = null;
  private readonly canvas: HTMLCanvasElement;

  constructor() {
    this.api = new GcsApi(window.location.origin.replace(/\/$/, ""));
    this.canvas = document.getElementById("map") as HTMLCanvasElement;
  }

  async run(): Promise<void> {
    this.store = await FleetStore.open(this.api);
    this.store.onChange(() => this.render());
    this.api.openTelemetry((frame) => this.store?.applyFrame(frame));
    window.setInterval(() => void this.store?.refreshMissions(), REPORT_POLL_MS);
    this.bindControls();
    this.fitToWorld();
    this.render();
  }

  private fitToWorld(): void {
    if (this.store === null) return;
    const points: [number, number][] = this.store.world.objects.map((o) => [
      o.position[0],
      o.position[1],
    ]);
    for (const drone of this.store.drones.values()) {
      if (drone.pose !== null) points.push([drone.pose.position[0], drone.pose.position[1]]);
    }
    if (this.preview !== null) {
      for (const route of this.preview.routes) {
        for (const [e, n] of route.pointsEnu) points.push([e, n]);
      }
    }
    for (const v of this.draft.vertices) points.push(v);
    this.viewport = fitViewport(points, this.canvas.width, this.canvas.height);
  }

  private status(text: string, isError = false): void {
    const line = document.getElementById("status")!;
    line.textContent = text;
    line.className = isError ? "error" : "";
  }

  private bindControls(): void {
    this.canvas.addEventListener("click", (event) => {
      if (this.viewport === null) return;
      const rect = this.canvas.getBoundingClientRect();
      const [e, n] = screenToWorld(
        event.clientX - rect.left,
        event.clientY - rect.top,
        this.viewport,
      );
      this.draft.add(e, n);
      this.render();
    });
    this.canvas.addEventListener("wheel", (event) => {
      if (this.viewport === null) return;
      event.preventDefault();
      const factor = event.deltaY < 0 ? 1.2 : 1 / 1.2;
      this.viewport.scale *= factor;
      this.render();
    });
    document.getElementById("clear")!.addEventListener("click", () => {
      this.draft.clear();
      this.preview = null;
      this.render();
    });
    document.getElementById("plan")!.addEventListener("click", () => void this.plan());
    document.getElementById("upload")!.addEventListener("click", () => void this.upload());
    for (const verb of ["start", "pause", "resume", "stop"] as MissionVerb[]) {
      document
        .getElementById(`mission-${verb}`)!
        .addEventListener("click", () => void this.command(verb));
    }
    document.getElementById("mission-select")!.addEventListener("change", (event) => {
      this.store?.selectMission((event.target as HTMLSelectElement).value || null);
    });
    document.getElementById("download")!.addEventListener("click", () => this.download());
  }

  private selectedDrones(): string[] {
    const boxes = document.querySelectorAll<HTMLInputElement>("#fleet input[type=checkbox]");
    return [...boxes].filter((box) => box.checked).map((box) => box.value);
  }

  private async plan(): Promise<void> {
    if (this.store === null || this.store.world.origin === null) {
      this.status("no geodetic origin configured", true);
      return;
    }
    const spacing = Number((document.getElementById("spacing") as HTMLInputElement).value);
    const altitude = Number((document.getElementById("altitude") as HTMLInputElement).value);
    const speed = Number((document.getElementById("speed") as HTMLInputElement).value);
    try {
      this.preview = await requestPlan(this.api, this.store.world.origin, this.draft, {
        spacing,
        drones: this.selectedDrones(),
        altitude,
        flightSpeed: speed,
      });
      const lengths = this.preview.routes
        .map((r) => `${r.ns}: ${r.lengthM.toFixed(1)} m`)
        .join(", ");
      this.status(`plan ready (${lengths})`);
    } catch (err) {
      this.preview = null;
      this.status(err instanceof ApiError ? err.reason : String(err), true);
    }
    this.fitToWorld();
    this.render();
  }

  private async upload(): Promise<void> {
    if (this.store === null || this.preview === null) return;
    try {
      const created = await this.api.uploadMission(this.preview.doc);
      this.store.selectMission(created.id);
      await this.store.refreshMissions();
      this.status(`mission ${created.id} uploaded`);
    } catch (err) {
      this.status(err instanceof ApiError ? err.reason : String(err), true);
    }
  }

  private async command(verb: MissionVerb): Promise<void> {
    if (this.store === null || this.store.selectedMission === null) return;
    try {
      await this.api.missionCommand(this.store.selectedMission, verb);
      await this.store.refreshMissions();
    } catch (err) {
      this.status(err instanceof ApiError ? err.reason : String(err), true);
    }
  }

  private download(): void {
    const report = this.store?.selectedReport();
    if (report === null || report === undefined) return;
    const blob = new Blob([JSON.stringify(report, null, 2)], { type: "application/json" });
    const anchor = document.createElement("a");
    anchor.href = URL.createObjectURL(blob);
    anchor.download = `${report.label}_report.json`;
    anchor.click();
    URL.revokeObjectURL(anchor.href);
  }

  private renderFleet(): void {
    if (this.store === null) return;
    const rows = this.store.roster.map((entry, i) => {
      const live = this.store!.drones.get(entry.ns);
      const item = live?.mission_item ?? "-";
      const status = live?.platform?.flight_status ?? "offline";
      const color = ROUTE_COLORS[i % ROUTE_COLORS.length];
      return `<label><input type="checkbox" value="${entry.ns}" checked>
        <span class="dot" style="background:${color}"></span>
        ${entry.ns} <small>${entry.estimator} | ${status} | ${item}</small></label>`;
    });
    document.getElementById("fleet")!.innerHTML = rows.join("");
  }

  private renderMission(): void {
    if (this.store === null) return;
    const select = document.getElementById("mission-select") as HTMLSelectElement;
    select.innerHTML = this.store.missions
      .map(
        (m) =>
          `<option value="${m.id}" ${m.id === this.store!.selectedMission ? "selected" : ""}>
            ${m.id} ${m.name} (${m.state})</option>`,
      )
      .join("");
    const entry = this.store.selectedEntry();
    const states = missionButtonStates(entry?.state ?? null);
    for (const verb of ["start", "pause", "resume", "stop"] as MissionVerb[]) {
      (document.getElementById(`mission-${verb}`) as HTMLButtonElement).disabled = !states[verb];
    }
    const report = this.store.selectedReport();
    document.getElementById("progress")!.innerHTML = report === null ? "" : progressHtml(report);
    (document.getElementById("download") as HTMLButtonElement).disabled = report === null;
  }

  render(): void {
    if (this.store === null) return;
    (document.getElementById("plan") as HTMLButtonElement).disabled = !this.draft.ready;
    (document.getElementById("upload") as HTMLButtonElement).disabled = this.preview === null;
    const fleetBox = document.getElementById("fleet")!;
    if (fleetBox.childElementCount === 0) this.renderFleet();
    this.renderMission();
    document.getElementById("clock")!.textContent =
      `t = ${(this.store.lastFrameT / 1e9).toFixed(1)} s`;
    if (this.viewport === null) this.fitToWorld();
    const ctx = this.canvas.getContext("2d");
    if (ctx !== null && this.viewport !== null) {
      drawScene(ctx, this.viewport, buildScene(this.store, this.draft, this.preview));
    }
  }
}

export function main(): void {
  const app = new App();
  void app.run();
}

if (typeof document !== "undefined" && document.getElementById("map") !== null) {
  main();
}
