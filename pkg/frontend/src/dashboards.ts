// Rolling dashboards: total vehicles, per-mode counts, encumbered edges.

import type { Snapshot } from "./protocol.js";
import { MODE_COLORS, Ctx2D } from "./render.js";

export interface SeriesPoint {
  timeS: number;
  total: number;
  modes: Record<string, number>;
  encumbered: number;
}

export class ModeSeries {
  readonly points: SeriesPoint[] = [];

  constructor(readonly windowS = 600) {}

  push(snapshot: Snapshot): void {
    const encumbered = snapshot.edges.reduce((n, e) => n + (e.encumbered ? 1 : 0), 0);
    this.points.push({
      timeS: snapshot.time_s,
      total: snapshot.counters.in_world,
      modes: { ...snapshot.counters.modes },
      encumbered,
    });
    const cutoff = snapshot.time_s - this.windowS;
    while (this.points.length > 0 && this.points[0].timeS < cutoff) {
      this.points.shift();
    }
  }

  latest(): SeriesPoint | null {
    return this.points.length ? this.points[this.points.length - 1] : null;
  }

  modeNames(): string[] {
    const names = new Set<string>();
    for (const p of this.points) {
      for (const name of Object.keys(p.modes)) {
        if (p.modes[name] > 0) names.add(name);
      }
    }
    return [...names].sort();
  }

  /** Per-mode counts always sum to the total series. */
  consistent(): boolean {
    return this.points.every((p) => {
      const sum = Object.values(p.modes).reduce((a, b) => a + b, 0);
      return sum === p.total;
    });
  }

  drawTo(ctx: Ctx2D, width: number, height: number): void {
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#10151b";
    ctx.fillRect(0, 0, width, height);
    if (this.points.length < 2) return;
    const t0 = this.points[0].timeS;
    const t1 = this.points[this.points.length - 1].timeS;
    const span = Math.max(t1 - t0, 1);
    const peak = Math.max(1, ...this.points.map((p) => p.total));

    const plot = (value: (p: SeriesPoint) => number, color: string, widthPx: number) => {
      ctx.strokeStyle = color;
      ctx.lineWidth = widthPx;
      ctx.beginPath();
      this.points.forEach((p, i) => {
        const x = ((p.timeS - t0) / span) * (width - 10) + 5;
        const y = height - 5 - (value(p) / peak) * (height - 10);
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.stroke();
    };

    plot((p) => p.total, "#ffffff", 2);
    for (const name of this.modeNames()) {
      plot((p) => p.modes[name] ?? 0, MODE_COLORS[name] ?? "#888888", 1.2);
    }
    plot((p) => p.encumbered, "#ffb020", 1);
  }
}
