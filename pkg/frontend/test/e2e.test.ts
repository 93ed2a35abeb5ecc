// End-to-end: spawn the real ground-control service, sketch the survey
// rectangle through the console's own modules, upload, fly to completion,
// and prove a mid-mission reload rebuilds the operator view.
import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { readFileSync } from "node:fs";
import { createServer, type AddressInfo } from "node:net";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import Ajv2020 from "ajv/dist/2020.js";
import WebSocket from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { GcsApi, type SocketCtor, type TelemetrySubscription } from "../src/api.js";
import { buildScene, missionButtonStates } from "../src/app.js";
import { PolygonDraft, requestPlan, type PlanPreview } from "../src/planner.js";
import { FleetStore } from "../src/store.js";
import type { MissionReportJson } from "../src/types.js";

const REPO_ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..");
const SOCKET = WebSocket as unknown as SocketCtor;

let service: ChildProcessWithoutNullStreams;
let serviceLog = "";
let api: GcsApi;
let storeA: FleetStore;
let subA: TelemetrySubscription | null = null;
let subB: TelemetrySubscription | null = null;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const port = (probe.address() as AddressInfo).port;
      probe.close(() => resolve(port));
    });
  });
}

async function waitFor(cond: () => boolean, timeoutMs: number, what: string): Promise<void> {
  const t0 = Date.now();
  while (!cond()) {
    if (Date.now() - t0 > timeoutMs) {
      throw new Error(`timed out waiting for ${what}\nservice log:\n${serviceLog}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
}

async function waitForReport(
  id: string,
  pred: (report: MissionReportJson) => boolean,
  timeoutMs: number,
  what: string,
): Promise<MissionReportJson> {
  const t0 = Date.now();
  for (;;) {
    const report = await api.missionReport(id);
    if (pred(report)) return report;
    if (Date.now() - t0 > timeoutMs) {
      throw new Error(`timed out waiting for ${what}; last state ${report.state}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
}

beforeAll(async () => {
  const port = await freePort();
  service = spawn(
    "python3",
    [
      join("scripts", "serve_gcs.py"),
      "--config",
      join("configs", "coverage_scenario.json"),
      "--port",
      String(port),
      "--speed",
      "0",
    ],
    { cwd: REPO_ROOT },
  );
  service.stdout.on("data", (chunk: Buffer) => (serviceLog += chunk.toString()));
  service.stderr.on("data", (chunk: Buffer) => (serviceLog += chunk.toString()));
  api = new GcsApi(`http://127.0.0.1:${port}`, undefined, SOCKET);
  const t0 = Date.now();
  for (;;) {
    try {
      await api.drones();
      break;
    } catch {
      if (Date.now() - t0 > 30_000) throw new Error(`service never came up\n${serviceLog}`);
      await new Promise((resolve) => setTimeout(resolve, 250));
    }
  }
  storeA = await FleetStore.open(api);
  subA = api.openTelemetry((frame) => storeA.applyFrame(frame));
});

afterAll(async () => {
  subA?.close();
  subB?.close();
  if (service !== undefined && service.exitCode === null) {
    service.kill("SIGTERM");
    await new Promise((resolve) => {
      const killer = setTimeout(() => {
        service.kill("SIGKILL");
        resolve(null);
      }, 5000);
      service.once("exit", () => {
        clearTimeout(killer);
        resolve(null);
      });
    });
  }
});

describe("console against the live service", () => {
  let preview: PlanPreview;
  let missionId: string;

  it("loads the fleet, world origin, and live telemetry", async () => {
    expect(storeA.roster.length).toBeGreaterThanOrEqual(2);
    expect(storeA.world.origin).not.toBeNull();
    await waitFor(() => storeA.frameCount > 0, 10_000, "first telemetry frame");
    const drawn = buildScene(storeA, new PolygonDraft(), null);
    expect(drawn.drones.length).toBe(storeA.roster.length);
    for (const mark of drawn.drones) {
      const live = storeA.drones.get(mark.ns)!;
      expect(mark.east).toBe(live.pose!.position[0]);
      expect(mark.north).toBe(live.pose!.position[1]);
    }
  });

  it("plans a survey of the drawn rectangle and previews balanced routes", async () => {
    const draft = new PolygonDraft();
    draft.add(10, 10);
    draft.add(100, 10);
    draft.add(100, 60);
    draft.add(10, 60);
    preview = await requestPlan(api, storeA.world.origin!, draft, {
      spacing: 5.0,
      drones: storeA.roster.map((d) => d.ns),
      altitude: 10.0,
      flightSpeed: 5.0,
    });
    expect(preview.routes.length).toBe(storeA.roster.length);
    const lengths = preview.routes.map((r) => r.lengthM);
    expect(Math.max(...lengths) / Math.min(...lengths)).toBeLessThanOrEqual(1.2);
    const colors = new Set(preview.routes.map((r) => r.color));
    expect(colors.size).toBe(preview.routes.length);
    for (const route of preview.routes) {
      for (const [e, n] of route.pointsEnu) {
        expect(e).toBeGreaterThan(10 - 3.0);
        expect(e).toBeLessThan(100 + 3.0);
        expect(n).toBeGreaterThan(10 - 3.0);
        expect(n).toBeLessThan(60 + 3.0);
      }
    }
  }, 30_000);

  it("uploads a document that validates against the shared schema", async () => {
    const schema = JSON.parse(
      readFileSync(join(REPO_ROOT, "docs", "mission_schema.json"), "utf-8"),
    ) as object;
    const validate = new Ajv2020({ allErrors: true }).compile(schema);
    expect(validate(preview.doc)).toBe(true);
    expect(validate.errors ?? []).toEqual([]);
    const created = await api.uploadMission(preview.doc);
    missionId = created.id;
    expect(created.state).toBe("PENDING");
    await storeA.refreshMissions();
    expect(storeA.missions.some((m) => m.id === missionId)).toBe(true);
    expect(missionButtonStates("PENDING").start).toBe(true);
    expect(missionButtonStates("PENDING").pause).toBe(false);
  });

  it("starts the mission and reaches the sweep", async () => {
    await api.missionCommand(missionId, "start");
    const report = await waitForReport(
      missionId,
      (r) => r.state === "RUNNING",
      10_000,
      "mission to start",
    );
    expect(missionButtonStates(report.state).pause).toBe(true);
    await waitFor(
      () =>
        storeA.roster.every((d) => {
          const live = storeA.drones.get(d.ns);
          return live?.mission_item != null;
        }),
      30_000,
      "mission items to appear in telemetry",
    );
  }, 60_000);

  it("survives a pause/resume round trip", async () => {
    await api.missionCommand(missionId, "pause");
    const paused = await waitForReport(
      missionId,
      (r) => r.state === "PAUSED",
      10_000,
      "mission to pause",
    );
    expect(missionButtonStates(paused.state).resume).toBe(true);
    expect(missionButtonStates(paused.state).start).toBe(false);
    await api.missionCommand(missionId, "resume");
    await waitForReport(missionId, (r) => r.state === "RUNNING", 10_000, "mission to resume");
  }, 30_000);

  it("rebuilds the same operator view on a fresh connection mid-mission", async () => {
    const storeB = await FleetStore.open(api);
    subB = api.openTelemetry((frame) => storeB.applyFrame(frame));
    expect(storeB.world).toEqual(storeA.world);
    expect(storeB.roster).toEqual(storeA.roster);
    expect(storeB.missions.map((m) => m.id)).toEqual(storeA.missions.map((m) => m.id));
    const reportB = storeB.selectedReport()!;
    expect(Object.keys(reportB.drones).sort()).toEqual(
      storeA.roster.map((d) => d.ns).sort(),
    );
    await waitFor(() => storeB.frameCount > 0, 10_000, "frames on the second connection");
    const drawn = buildScene(storeB, new PolygonDraft(), null);
    expect(drawn.drones.length).toBe(storeB.roster.length);
    for (const mark of drawn.drones) {
      expect(mark.east).toBe(storeB.drones.get(mark.ns)!.pose!.position[0]);
    }
  }, 30_000);

  it("flies the survey to completion with every item succeeding", async () => {
    const report = await waitForReport(
      missionId,
      (r) => r.state === "DONE",
      150_000,
      "mission completion",
    );
    for (const droneReport of Object.values(report.drones)) {
      expect(droneReport.state).toBe("DONE");
      for (const item of droneReport.items) {
        expect(item.result).toBe("SUCCESS");
      }
    }
    const states = missionButtonStates(report.state);
    expect(states.start).toBe(false);
    expect(states.pause).toBe(false);
    expect(states.stop).toBe(false);
    await storeA.refreshMissions();
    expect(storeA.missions.find((m) => m.id === missionId)?.state).toBe("DONE");
  }, 180_000);
});
