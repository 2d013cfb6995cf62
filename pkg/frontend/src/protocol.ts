// Wire types for the steering service, plus client-side validation so the
// console can never emit a command the server would reject.

export interface NetworkVertex {
  id: number;
  x: number;
  y: number;
}

export interface NetworkEdge {
  id: number;
  from: number;
  to: number;
  lanes: number;
  points: [number, number][];
}

export interface NetworkMessage {
  type: "network";
  vertices: NetworkVertex[];
  edges: NetworkEdge[];
}

export interface VehicleDot {
  id: number;
  x: number;
  y: number;
  heading: number;
  speed: number;
  mode: string;
}

export interface EdgeState {
  id: number;
  density: number;
  encumbered: boolean;
  barred: boolean;
}

export interface ActiveEvent {
  x: number;
  y: number;
  radius: number;
  intensity: number;
}

export interface SnapshotCounters {
  in_world: number;
  spawned: number;
  arrivals: number;
  stranded: number;
  modes: Record<string, number>;
}

export interface Snapshot {
  type: "snapshot";
  tick: number;
  time_s: number;
  vehicles: VehicleDot[];
  edges: EdgeState[];
  events: ActiveEvent[];
  counters: SnapshotCounters;
  world_hash: string;
}

export interface AckMessage {
  type: "ack";
  cmd_id?: number | null;
}

export interface ErrorMessage {
  type: "error";
  msg: string;
  cmd_id?: number | null;
}

export interface DoneMessage {
  type: "done";
  world_hash: string;
}

export type ServerMessage =
  | NetworkMessage
  | Snapshot
  | AckMessage
  | ErrorMessage
  | DoneMessage;

export type Command =
  | { type: "bar_edge"; edge: number; cmd_id?: number; at_tick?: number }
  | { type: "unbar_edge"; edge: number; cmd_id?: number; at_tick?: number }
  | {
      type: "explosion";
      x: number;
      y: number;
      radius: number;
      intensity: number;
      cmd_id?: number;
      at_tick?: number;
    }
  | { type: "spawn_rate"; rate: number; cmd_id?: number; at_tick?: number }
  | { type: "pause"; cmd_id?: number }
  | { type: "resume"; cmd_id?: number }
  | { type: "speed"; mult: number; cmd_id?: number };

function finite(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

/** Returns null when the command matches the server schema, else a reason. */
export function validateCommand(cmd: unknown): string | null {
  if (typeof cmd !== "object" || cmd === null) return "command must be an object";
  const c = cmd as Record<string, unknown>;
  switch (c.type) {
    case "bar_edge":
    case "unbar_edge":
      if (!Number.isInteger(c.edge) || (c.edge as number) < 0) return "edge must be a non-negative integer";
      return null;
    case "explosion":
      if (!finite(c.x) || !finite(c.y)) return "explosion needs finite x and y";
      if (!finite(c.radius) || (c.radius as number) <= 0) return "radius must be > 0";
      if (!finite(c.intensity) || (c.intensity as number) <= 0 || (c.intensity as number) > 1) {
        return "intensity must be in (0, 1]";
      }
      return null;
    case "spawn_rate":
      if (!finite(c.rate) || (c.rate as number) < 0) return "rate must be >= 0";
      return null;
    case "pause":
    case "resume":
      return null;
    case "speed":
      if (!finite(c.mult) || (c.mult as number) <= 0) return "mult must be > 0";
      return null;
    default:
      return `unknown command type ${String(c.type)}`;
  }
}

export function parseServerMessage(raw: unknown): ServerMessage {
  if (typeof raw !== "object" || raw === null) throw new Error("not an object");
  const m = raw as Record<string, unknown>;
  switch (m.type) {
    case "network":
      if (!Array.isArray(m.vertices) || !Array.isArray(m.edges)) {
        throw new Error("network message missing vertices/edges");
      }
      return raw as NetworkMessage;
    case "snapshot":
      if (!Array.isArray(m.vehicles) || !Array.isArray(m.edges) || !finite(m.tick)) {
        throw new Error("snapshot message malformed");
      }
      return raw as Snapshot;
    case "ack":
      return raw as AckMessage;
    case "error":
      if (typeof m.msg !== "string") throw new Error("error message without msg");
      return raw as ErrorMessage;
    case "done":
      if (typeof m.world_hash !== "string") throw new Error("done without world_hash");
      return raw as DoneMessage;
    default:
      throw new Error(`unknown server message type ${String(m.type)}`);
  }
}
