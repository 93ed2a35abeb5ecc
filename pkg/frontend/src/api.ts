// Thin client for the ground-control service. All state lives server-side;
// this module only shapes requests and decodes responses.
import type {
  DroneEntry,
  MissionDocumentJson,
  MissionEntry,
  MissionReportJson,
  PlanRequest,
  TelemetryFrame,
  WorldJson,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: unknown,
  ) {
    super(`HTTP ${status}: ${ApiError.describe(body)}`);
    this.name = "ApiError";
  }

  // Service errors arrive as {"error": ...} or {"violations": [...]};
  // surface them verbatim so the operator sees what the service said.
  static describe(body: unknown): string {
    if (body && typeof body === "object") {
      const rec = body as Record<string, unknown>;
      if (typeof rec.error === "string") return rec.error;
      if (Array.isArray(rec.violations)) return rec.violations.join("; ");
      if (typeof rec.detail === "string") return rec.detail;
    }
    return JSON.stringify(body);
  }

  get reason(): string {
    return ApiError.describe(this.body);
  }
}

export type MissionVerb = "start" | "pause" | "resume" | "stop";

export interface TelemetrySubscription {
  close(): void;
}

// Minimal view of the WebSocket constructor so node tests can pass the
// "ws" package where browsers pass window.WebSocket.
export interface SocketLike {
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  close(): void;
}
export type SocketCtor = new (url: string) => SocketLike;

type FetchFn = (url: string, init?: RequestInit) => Promise<Response>;

export class GcsApi {
  private readonly fetchFn: FetchFn;
  private readonly socketCtor: SocketCtor | null;

  constructor(
    readonly endpoint: string,
    fetchFn?: FetchFn,
    socketCtor?: SocketCtor,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
    this.socketCtor =
      socketCtor ?? ((globalThis as { WebSocket?: SocketCtor }).WebSocket ?? null);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.endpoint + path, init);
    const decoded = await response.json();
    if (!response.ok) throw new ApiError(response.status, decoded);
    return decoded as T;
  }

  async drones(): Promise<DroneEntry[]> {
    const body = await this.request<{ drones: DroneEntry[] }>("GET", "/drones");
    return body.drones;
  }

  droneSnapshot(ns: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/drones/${ns}`);
  }

  world(): Promise<WorldJson> {
    return this.request("GET", "/world");
  }

  async missions(): Promise<MissionEntry[]> {
    const body = await this.request<{ missions: MissionEntry[] }>("GET", "/missions");
    return body.missions;
  }

  uploadMission(doc: MissionDocumentJson): Promise<{ id: string; state: string }> {
    return this.request("POST", "/missions", doc);
  }

  missionCommand(id: string, verb: MissionVerb): Promise<{ id: string; state: string }> {
    return this.request("POST", `/missions/${id}/${verb}`);
  }

  missionReport(id: string): Promise<MissionReportJson> {
    return this.request("GET", `/missions/${id}/report`);
  }

  planCoverage(req: PlanRequest): Promise<MissionDocumentJson> {
    return this.request("POST", "/plan/coverage", req);
  }

  // Single long-lived telemetry socket; frames are full fleet snapshots,
  // so dropping one is harmless.
  openTelemetry(onFrame: (frame: TelemetryFrame) => void): TelemetrySubscription {
    if (this.socketCtor === null) throw new Error("no WebSocket constructor available");
    const url = this.endpoint.replace(/^http/, "ws") + "/telemetry";
    const socket = new this.socketCtor(url);
    socket.onmessage = (event) => {
      onFrame(JSON.parse(String(event.data)) as TelemetryFrame);
    };
    return { close: () => socket.close() };
  }
}
