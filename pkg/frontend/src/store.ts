// Client-side mirror of fleet state. Everything here is rebuilt from the
// GET endpoints plus the telemetry stream, so a page reload loses nothing.
import type { GcsApi } from "./api.js";
import type {
  DroneEntry,
  MissionEntry,
  MissionReportJson,
  TelemetryDrone,
  TelemetryFrame,
  WorldJson,
} from "./types.js";

// Flown-trail cap; at 10 Hz this is well over five minutes of history.
const TRAIL_LIMIT = 4000;

export class FleetStore {
  world: WorldJson = { origin: null, objects: [] };
  roster: DroneEntry[] = [];
  drones = new Map<string, TelemetryDrone>();
  trails = new Map<string, [number, number][]>();
  missions: MissionEntry[] = [];
  reports = new Map<string, MissionReportJson>();
  selectedMission: string | null = null;
  lastFrameT = 0;
  frameCount = 0;

  private listeners: (() => void)[] = [];

  constructor(private readonly api: GcsApi) {}

  // Full reconstruction from the service; called on load and after any
  // action that changes mission state.
  static async open(api: GcsApi): Promise<FleetStore> {
    const store = new FleetStore(api);
    store.world = await api.world();
    store.roster = await api.drones();
    for (const entry of store.roster) store.trails.set(entry.ns, []);
    await store.refreshMissions();
    return store;
  }

  async refreshMissions(): Promise<void> {
    this.missions = await this.api.missions();
    for (const entry of this.missions) {
      this.reports.set(entry.id, await this.api.missionReport(entry.id));
    }
    if (this.selectedMission === null && this.missions.length > 0) {
      this.selectedMission = this.missions[this.missions.length - 1].id;
    }
    this.notify();
  }

  applyFrame(frame: TelemetryFrame): void {
    this.lastFrameT = frame.t;
    this.frameCount += 1;
    for (const [ns, drone] of Object.entries(frame.drones)) {
      this.drones.set(ns, drone);
      if (drone.pose !== null) {
        let trail = this.trails.get(ns);
        if (trail === undefined) {
          trail = [];
          this.trails.set(ns, trail);
        }
        trail.push([drone.pose.position[0], drone.pose.position[1]]);
        if (trail.length > TRAIL_LIMIT) trail.shift();
      }
    }
    this.notify();
  }

  selectMission(id: string | null): void {
    this.selectedMission = id;
    this.notify();
  }

  selectedReport(): MissionReportJson | null {
    if (this.selectedMission === null) return null;
    return this.reports.get(this.selectedMission) ?? null;
  }

  selectedEntry(): MissionEntry | null {
    if (this.selectedMission === null) return null;
    return this.missions.find((m) => m.id === this.selectedMission) ?? null;
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }
}
