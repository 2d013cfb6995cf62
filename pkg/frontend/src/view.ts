// Camera: world coordinates are meters with y up; screen pixels have y down.

export interface Bounds {
  minX: number;
  minY: number;
  maxX: number;
  maxY: number;
}

export class Camera {
  cx = 0; // world point at the canvas center
  cy = 0;
  scale = 1; // pixels per meter

  toScreen(wx: number, wy: number, width: number, height: number): [number, number] {
    return [
      width / 2 + (wx - this.cx) * this.scale,
      height / 2 - (wy - this.cy) * this.scale,
    ];
  }

  toWorld(sx: number, sy: number, width: number, height: number): [number, number] {
    return [
      this.cx + (sx - width / 2) / this.scale,
      this.cy - (sy - height / 2) / this.scale,
    ];
  }

  panByPixels(dx: number, dy: number): void {
    this.cx -= dx / this.scale;
    this.cy += dy / this.scale;
  }

  /** Zoom by a factor keeping the world point under (sx, sy) fixed. */
  zoomAt(sx: number, sy: number, factor: number, width: number, height: number): void {
    const [wx, wy] = this.toWorld(sx, sy, width, height);
    this.scale *= factor;
    this.cx = wx - (sx - width / 2) / this.scale;
    this.cy = wy + (sy - height / 2) / this.scale;
  }

  fit(bounds: Bounds, width: number, height: number, margin = 20): void {
    const spanX = Math.max(bounds.maxX - bounds.minX, 1);
    const spanY = Math.max(bounds.maxY - bounds.minY, 1);
    this.scale = Math.min(
      (width - 2 * margin) / spanX,
      (height - 2 * margin) / spanY,
    );
    this.cx = (bounds.minX + bounds.maxX) / 2;
    this.cy = (bounds.minY + bounds.maxY) / 2;
  }
}

export function networkBounds(points: Iterable<[number, number]>): Bounds {
  let minX = Infinity;
  let minY = Infinity;
  let maxX = -Infinity;
  let maxY = -Infinity;
  for (const [x, y] of points) {
    if (x < minX) minX = x;
    if (y < minY) minY = y;
    if (x > maxX) maxX = x;
    if (y > maxY) maxY = y;
  }
  return { minX, minY, maxX, maxY };
}
