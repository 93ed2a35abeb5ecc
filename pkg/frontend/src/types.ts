// Wire contracts of the ground-control HTTP/WebSocket API.
// Field names mirror the service JSON exactly; do not rename.

export interface GeoPointJson {
  latitude: number;
  longitude: number;
  altitude: number;
}

export interface WorldObjectJson {
  name: string;
  position: number[];
  yaw_deg: number;
}

export interface WorldJson {
  origin: GeoPointJson | null;
  objects: WorldObjectJson[];
}

export interface DroneEntry {
  ns: string;
  preset: string;
  estimator: string;
  controller: string;
}

export interface PoseJson {
  frame_id: string;
  t: number;
  position: number[];
  velocity: number[];
  orientation: number[];
  angular_velocity: number[];
}

export interface PlatformJson {
  connected: boolean;
  armed: boolean;
  offboard: boolean;
  flight_status: string;
  active_mode: unknown;
  supported_modes: unknown[];
}

export interface BehaviorStatusJson {
  state: string;
  last_result: string;
  feedback: Record<string, unknown>;
}

export interface TelemetryDrone {
  ns: string;
  pose: PoseJson | null;
  platform: PlatformJson | null;
  behaviors: Record<string, BehaviorStatusJson>;
  mission_item: string | null;
}

export interface TelemetryFrame {
  t: number;
  drones: Record<string, TelemetryDrone>;
}

// Mission documents: one item list per drone namespace.
export interface MissionItemJson {
  id: string;
  kind: string;
  name?: string;
  args?: Record<string, unknown>;
  label?: string;
  [extra: string]: unknown;
}

export interface MissionDocumentJson {
  version: number;
  name?: string;
  drones: Record<string, MissionItemJson[]>;
}

export interface MissionEntry {
  id: string;
  name: string;
  state: string;
}

export interface ItemReportJson {
  id: string;
  result: string;
  start_t: number | null;
  end_t: number | null;
  reason: string;
}

export interface DroneReportJson {
  state: string;
  reason: string;
  items: ItemReportJson[];
}

export interface MissionReportJson {
  label: string;
  name: string;
  state: string;
  started_t: number | null;
  finished_t: number | null;
  diagnostic: string;
  pauses: number[][];
  drones: Record<string, DroneReportJson>;
}

export interface PlanRequest {
  polygon: GeoPointJson[];
  spacing: number;
  drones: string[];
  altitude?: number;
  flight_speed?: number;
  takeoff_speed?: number;
  land_speed?: number;
}
