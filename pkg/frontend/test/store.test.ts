import { describe, expect, it } from "vitest";
import { GcsApi } from "../src/api.js";
import { FleetStore } from "../src/store.js";
import type { TelemetryFrame } from "../src/types.js";

// Routes a fake service: path -> JSON body.
function fakeApi(routes: Record<string, unknown>): GcsApi {
  return new GcsApi("http://test", async (url) => {
    const path = new URL(url).pathname;
    if (!(path in routes)) return new Response("{}", { status: 404 });
    return new Response(JSON.stringify(routes[path]), {
      status: 200,
      headers: { "content-type": "application/json" },
    });
  });
}

const ROUTES: Record<string, unknown> = {
  "/world": {
    origin: { latitude: 40.0, longitude: -3.0, altitude: 650.0 },
    objects: [{ name: "gate1", position: [2.0, 0.0, 1.5], yaw_deg: 90.0 }],
  },
  "/drones": {
    drones: [
      { ns: "uav1", preset: "default", estimator: "ground_truth", controller: "pid" },
      { ns: "uav2", preset: "default", estimator: "ground_truth", controller: "pid" },
    ],
  },
  "/missions": { missions: [{ id: "m1", name: "polygon coverage", state: "RUNNING" }] },
  "/missions/m1/report": {
    label: "m1",
    name: "polygon coverage",
    state: "RUNNING",
    started_t: 0,
    finished_t: null,
    diagnostic: "",
    pauses: [],
    drones: {
      uav1: {
        state: "RUNNING",
        reason: "",
        items: [
          { id: "arm", result: "SUCCESS", start_t: 0, end_t: 1, reason: "" },
          { id: "takeoff", result: "RUNNING", start_t: 1, end_t: null, reason: "" },
        ],
      },
    },
  },
};

function frame(t: number, positions: Record<string, [number, number, number]>): TelemetryFrame {
  const drones: TelemetryFrame["drones"] = {};
  for (const [ns, position] of Object.entries(positions)) {
    drones[ns] = {
      ns,
      pose: {
        frame_id: "map",
        t,
        position,
        velocity: [0, 0, 0],
        orientation: [1, 0, 0, 0],
        angular_velocity: [0, 0, 0],
      },
      platform: null,
      behaviors: {},
      mission_item: "takeoff",
    };
  }
  return { t, drones };
}

describe("FleetStore", () => {
  it("reconstructs the full operator view from GET endpoints alone", async () => {
    const store = await FleetStore.open(fakeApi(ROUTES));
    expect(store.world.origin?.latitude).toBe(40.0);
    expect(store.world.objects[0].name).toBe("gate1");
    expect(store.roster.map((d) => d.ns)).toEqual(["uav1", "uav2"]);
    expect(store.missions).toEqual([{ id: "m1", name: "polygon coverage", state: "RUNNING" }]);
    expect(store.selectedMission).toBe("m1");
    expect(store.selectedReport()?.drones.uav1.items[0].result).toBe("SUCCESS");
  });

  it("builds identical views for two independent connections", async () => {
    const first = await FleetStore.open(fakeApi(ROUTES));
    const second = await FleetStore.open(fakeApi(ROUTES));
    expect(second.world).toEqual(first.world);
    expect(second.roster).toEqual(first.roster);
    expect(second.missions).toEqual(first.missions);
    expect(second.selectedReport()).toEqual(first.selectedReport());
  });

  it("tracks latest poses and grows flown trails from frames", async () => {
    const store = await FleetStore.open(fakeApi(ROUTES));
    store.applyFrame(frame(1_000_000_000, { uav1: [1, 2, 3], uav2: [4, 5, 6] }));
    store.applyFrame(frame(2_000_000_000, { uav1: [1.5, 2.5, 3], uav2: [4, 5, 6] }));
    expect(store.lastFrameT).toBe(2_000_000_000);
    expect(store.frameCount).toBe(2);
    expect(store.drones.get("uav1")?.pose?.position).toEqual([1.5, 2.5, 3]);
    expect(store.drones.get("uav1")?.mission_item).toBe("takeoff");
    expect(store.trails.get("uav1")).toEqual([
      [1, 2],
      [1.5, 2.5],
    ]);
    expect(store.trails.get("uav2")?.length).toBe(2);
  });

  it("caps trails so long sessions do not grow without bound", async () => {
    const store = await FleetStore.open(fakeApi(ROUTES));
    for (let i = 0; i < 4100; i += 1) {
      store.applyFrame(frame(i, { uav1: [i, 0, 0] }));
    }
    const trail = store.trails.get("uav1")!;
    expect(trail.length).toBe(4000);
    expect(trail[trail.length - 1][0]).toBe(4099);
    expect(trail[0][0]).toBe(100);
  });

  it("notifies listeners on frames and refreshes", async () => {
    const store = await FleetStore.open(fakeApi(ROUTES));
    let seen = 0;
    store.onChange(() => (seen += 1));
    store.applyFrame(frame(1, { uav1: [0, 0, 0] }));
    await store.refreshMissions();
    expect(seen).toBe(2);
  });

  it("ignores drones with no pose yet", async () => {
    const store = await FleetStore.open(fakeApi(ROUTES));
    store.applyFrame({
      t: 5,
      drones: {
        uav1: { ns: "uav1", pose: null, platform: null, behaviors: {}, mission_item: null },
      },
    });
    expect(store.trails.get("uav1")).toEqual([]);
    expect(store.drones.get("uav1")?.pose).toBeNull();
  });
});
