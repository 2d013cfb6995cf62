// Click-to-command translation: the UI never simulates, it only asks.

import { nearestEdge } from "./hittest.js";
import type { Command, EdgeState, NetworkEdge } from "./protocol.js";
import type { Camera } from "./view.js";

export type Tool = "inspect" | "explode" | "bar";

export interface ToolSettings {
  radius: number; // meters
  intensity: number; // (0, 1]
}

export const EDGE_PICK_TOLERANCE_PX = 10;

export interface ClickResult {
  command: Command | null;
  selectedEdge: number | null;
}

/** Translate a canvas click into an outbound command (or a selection). */
export function clickToCommand(
  tool: Tool,
  sx: number, sy: number,
  camera: Camera,
  width: number, height: number,
  edges: NetworkEdge[],
  barredNow: ReadonlySet<number>,
  settings: ToolSettings,
): ClickResult {
  const [wx, wy] = camera.toWorld(sx, sy, width, height);
  if (tool === "explode") {
    return {
      command: {
        type: "explosion",
        x: wx,
        y: wy,
        radius: settings.radius,
        intensity: settings.intensity,
      },
      selectedEdge: null,
    };
  }
  const tolerance = EDGE_PICK_TOLERANCE_PX / camera.scale;
  const hit = nearestEdge(edges, wx, wy, tolerance);
  if (hit === null) {
    return { command: null, selectedEdge: null };
  }
  if (tool === "bar") {
    const type = barredNow.has(hit) ? "unbar_edge" : "bar_edge";
    return { command: { type, edge: hit }, selectedEdge: hit };
  }
  return { command: null, selectedEdge: hit };
}

export function barredSet(edgeStates: EdgeState[]): Set<number> {
  const out = new Set<number>();
  for (const e of edgeStates) {
    if (e.barred) out.add(e.id);
  }
  return out;
}
