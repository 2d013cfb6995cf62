// Nearest-edge lookup for the bar/inspect tools.

import type { NetworkEdge } from "./protocol.js";

export function pointSegmentDistance(
  px: number, py: number,
  ax: number, ay: number,
  bx: number, by: number,
): number {
  const dx = bx - ax;
  const dy = by - ay;
  const lengthSq = dx * dx + dy * dy;
  let t = 0;
  if (lengthSq > 0) {
    t = Math.max(0, Math.min(1, ((px - ax) * dx + (py - ay) * dy) / lengthSq));
  }
  const qx = ax + t * dx;
  const qy = ay + t * dy;
  return Math.hypot(px - qx, py - qy);
}

export function distanceToEdge(edge: NetworkEdge, wx: number, wy: number): number {
  let best = Infinity;
  const pts = edge.points;
  for (let i = 1; i < pts.length; i++) {
    const d = pointSegmentDistance(wx, wy, pts[i - 1][0], pts[i - 1][1], pts[i][0], pts[i][1]);
    if (d < best) best = d;
  }
  return best;
}

/** Closest edge within maxDistance meters of the world point, or null. */
export function nearestEdge(
  edges: NetworkEdge[], wx: number, wy: number, maxDistance: number,
): number | null {
  let bestId: number | null = null;
  let best = maxDistance;
  for (const edge of edges) {
    const d = distanceToEdge(edge, wx, wy);
    if (d < best || (d === best && bestId !== null && edge.id < bestId)) {
      best = d;
      bestId = edge.id;
    }
  }
  return bestId;
}
