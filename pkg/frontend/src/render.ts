// Immediate-mode map rendering: edges colored by density, vehicles as
// oriented dots batched per mode, crisis buffers as circles.

import type { NetworkEdge, NetworkMessage, Snapshot } from "./protocol.js";
import type { Camera } from "./view.js";

export const MODE_COLORS: Record<string, string> = {
  normal: "#9acd6a",
  jam_escape: "#e8c547",
  chicken: "#3b7bff", // fleeing vehicles render blue
  spectator: "#c77dff",
  pragmatic: "#4ad6c6",
  wandering: "#ff9f43",
  roadrunner: "#f05d7a",
  sheep: "#d8d8d8",
};

export interface Ctx2D {
  lineWidth: number;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  globalAlpha: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fill(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  setLineDash(segments: number[]): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
}

export interface RenderStats {
  edgesDrawn: number;
  vehiclesDrawn: number;
  culled: number;
}

export function densityColor(density: number): string {
  // green (free) -> amber -> red (jammed), saturating near jam density
  const t = Math.min(density / 120, 1);
  const r = Math.round(40 + 215 * t);
  const g = Math.round(190 - 150 * t);
  return `rgb(${r},${g},48)`;
}

interface EdgeRun {
  edge: NetworkEdge;
  density: number;
  encumbered: boolean;
  barred: boolean;
}

export class MapRenderer {
  private edgesById = new Map<number, NetworkEdge>();

  constructor(network: NetworkMessage) {
    for (const edge of network.edges) this.edgesById.set(edge.id, edge);
  }

  edges(): NetworkEdge[] {
    return [...this.edgesById.values()];
  }

  render(
    ctx: Ctx2D,
    snapshot: Snapshot | null,
    camera: Camera,
    width: number,
    height: number,
    selectedEdge: number | null = null,
  ): RenderStats {
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#141a20";
    ctx.fillRect(0, 0, width, height);

    const states = new Map<number, EdgeRun>();
    for (const edge of this.edgesById.values()) {
      states.set(edge.id, { edge, density: 0, encumbered: false, barred: false });
    }
    if (snapshot) {
      for (const st of snapshot.edges) {
        const run = states.get(st.id);
        if (run) {
          run.density = st.density;
          run.encumbered = st.encumbered;
          run.barred = st.barred;
        }
      }
    }

    let edgesDrawn = 0;
    ctx.globalAlpha = 1;
    ctx.setLineDash([]);
    for (const run of states.values()) {
      edgesDrawn += this.strokeEdge(ctx, run, camera, width, height, run.edge.id === selectedEdge);
    }

    let vehiclesDrawn = 0;
    let culled = 0;
    if (snapshot) {
      const byMode = new Map<string, typeof snapshot.vehicles>();
      for (const veh of snapshot.vehicles) {
        const [sx, sy] = camera.toScreen(veh.x, veh.y, width, height);
        if (sx < -10 || sy < -10 || sx > width + 10 || sy > height + 10) {
          culled++;
          continue;
        }
        let bucket = byMode.get(veh.mode);
        if (!bucket) {
          bucket = [];
          byMode.set(veh.mode, bucket);
        }
        bucket.push(veh);
      }
      const size = Math.max(2, Math.min(5, camera.scale * 4.5));
      for (const [mode, bucket] of byMode) {
        ctx.fillStyle = MODE_COLORS[mode] ?? "#ffffff";
        ctx.beginPath();
        for (const veh of bucket) {
          const [sx, sy] = camera.toScreen(veh.x, veh.y, width, height);
          const hx = Math.cos(veh.heading);
          const hy = Math.sin(veh.heading);
          // oriented sliver: nose forward, flat tail
          ctx.moveTo(sx + hx * size, sy - hy * size);
          ctx.lineTo(sx - hx * size * 0.6 - hy * size * 0.5, sy + hy * size * 0.6 - hx * size * 0.5);
          ctx.lineTo(sx - hx * size * 0.6 + hy * size * 0.5, sy + hy * size * 0.6 + hx * size * 0.5);
        }
        ctx.fill();
        vehiclesDrawn += bucket.length;
      }

      ctx.strokeStyle = "#ff3b30";
      ctx.lineWidth = 2;
      for (const event of snapshot.events) {
        const [sx, sy] = camera.toScreen(event.x, event.y, width, height);
        const r = Math.max(4, event.radius * camera.scale);
        ctx.beginPath();
        ctx.arc(sx, sy, Math.min(r, Math.hypot(width, height)), 0, Math.PI * 2);
        ctx.stroke();
      }
    }
    return { edgesDrawn, vehiclesDrawn, culled };
  }

  private strokeEdge(
    ctx: Ctx2D,
    run: EdgeRun,
    camera: Camera,
    width: number,
    height: number,
    selected: boolean,
  ): number {
    const pts = run.edge.points;
    const [x0, y0] = camera.toScreen(pts[0][0], pts[0][1], width, height);
    const [x1, y1] = camera.toScreen(
      pts[pts.length - 1][0], pts[pts.length - 1][1], width, height,
    );
    if (
      Math.max(x0, x1) < 0 || Math.max(y0, y1) < 0 ||
      Math.min(x0, x1) > width || Math.min(y0, y1) > height
    ) {
      return 0;
    }
    if (run.encumbered) {
      ctx.strokeStyle = "#ffb020";
      ctx.lineWidth = 6;
      this.tracePath(ctx, pts, camera, width, height);
      ctx.stroke();
    }
    ctx.strokeStyle = selected ? "#ffffff" : densityColor(run.density);
    ctx.lineWidth = selected ? 3.5 : 2;
    ctx.setLineDash(run.barred ? [6, 5] : []);
    this.tracePath(ctx, pts, camera, width, height);
    ctx.stroke();
    ctx.setLineDash([]);
    return 1;
  }

  private tracePath(
    ctx: Ctx2D,
    pts: [number, number][],
    camera: Camera,
    width: number,
    height: number,
  ): void {
    ctx.beginPath();
    const [sx, sy] = camera.toScreen(pts[0][0], pts[0][1], width, height);
    ctx.moveTo(sx, sy);
    for (let i = 1; i < pts.length; i++) {
      const [x, y] = camera.toScreen(pts[i][0], pts[i][1], width, height);
      ctx.lineTo(x, y);
    }
  }
}
