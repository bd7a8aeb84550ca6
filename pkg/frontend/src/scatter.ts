/** Scatter-point storage and spatial queries on typed arrays.
 *
 * Point data lives in flat Float64Arrays so a million points stay cheap to
 * build, decimate for overview rendering, and brush at interactive rates; a
 * uniform grid index answers box, lasso, and nearest-point queries without
 * scanning everything. */

import type { DescriptorPoint, ParityPoint, PlotPayload } from './types.js';

export interface PointSet {
  x: Float64Array;
  y: Float64Array;
  frame: Int32Array;
  n: number;
}

export function fromPlotPayload(payload: PlotPayload): PointSet {
  const n = payload.points.length;
  const x = new Float64Array(n);
  const y = new Float64Array(n);
  const frame = new Int32Array(n);
  payload.points.forEach((p, k) => {
    if ('x' in p) {
      x[k] = (p as DescriptorPoint).x;
      y[k] = (p as DescriptorPoint).y;
    } else {
      x[k] = (p as ParityPoint).ref;
      y[k] = (p as ParityPoint).pred;
    }
    frame[k] = p.frame;
  });
  return { x, y, frame, n };
}

export function makePointSet(
  xs: ArrayLike<number>,
  ys: ArrayLike<number>,
  frames?: ArrayLike<number>,
): PointSet {
  const n = xs.length;
  const frame = new Int32Array(n);
  if (frames) {
    for (let k = 0; k < n; k++) frame[k] = frames[k];
  } else {
    for (let k = 0; k < n; k++) frame[k] = k;
  }
  return { x: Float64Array.from(xs), y: Float64Array.from(ys), frame, n };
}

export interface Bounds {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

/** Expand bounds by a fraction of each span: the plot area around the data. */
export function padBounds(bounds: Bounds, fraction = 0.1): Bounds {
  const dx = (bounds.xMax - bounds.xMin || 1) * fraction;
  const dy = (bounds.yMax - bounds.yMin || 1) * fraction;
  return {
    xMin: bounds.xMin - dx,
    xMax: bounds.xMax + dx,
    yMin: bounds.yMin - dy,
    yMax: bounds.yMax + dy,
  };
}


export function boundsOf(points: PointSet): Bounds {
  let xMin = Infinity;
  let xMax = -Infinity;
  let yMin = Infinity;
  let yMax = -Infinity;
  for (let k = 0; k < points.n; k++) {
    if (points.x[k] < xMin) xMin = points.x[k];
    if (points.x[k] > xMax) xMax = points.x[k];
    if (points.y[k] < yMin) yMin = points.y[k];
    if (points.y[k] > yMax) yMax = points.y[k];
  }
  if (points.n === 0) return { xMin: 0, xMax: 1, yMin: 0, yMax: 1 };
  return { xMin, xMax, yMin, yMax };
}

/** Uniform-grid spatial index over a point set. */
export class SpatialGrid {
  private readonly cells: Int32Array;
  private readonly starts: Int32Array;
  private readonly cols: number;
  private readonly rows: number;
  private readonly bounds: Bounds;
  private readonly cellW: number;
  private readonly cellH: number;

  constructor(readonly points: PointSet, targetPerCell = 8) {
    this.bounds = boundsOf(points);
    const cellCount = Math.max(1, Math.ceil(points.n / targetPerCell));
    const side = Math.max(1, Math.round(Math.sqrt(cellCount)));
    this.cols = side;
    this.rows = side;
    this.cellW = (this.bounds.xMax - this.bounds.xMin) / this.cols || 1;
    this.cellH = (this.bounds.yMax - this.bounds.yMin) / this.rows || 1;

    // counting sort of point indices into cells
    const counts = new Int32Array(this.cols * this.rows + 1);
    const assignment = new Int32Array(points.n);
    for (let k = 0; k < points.n; k++) {
      const cell = this.cellOf(points.x[k], points.y[k]);
      assignment[k] = cell;
      counts[cell + 1]++;
    }
    for (let c = 0; c < this.cols * this.rows; c++) counts[c + 1] += counts[c];
    this.starts = counts;
    this.cells = new Int32Array(points.n);
    const cursor = counts.slice(0, this.cols * this.rows);
    for (let k = 0; k < points.n; k++) {
      this.cells[cursor[assignment[k]]++] = k;
    }
  }

  private cellOf(x: number, y: number): number {
    let cx = Math.floor((x - this.bounds.xMin) / this.cellW);
    let cy = Math.floor((y - this.bounds.yMin) / this.cellH);
    cx = Math.min(this.cols - 1, Math.max(0, cx));
    cy = Math.min(this.rows - 1, Math.max(0, cy));
    return cy * this.cols + cx;
  }

  private cellRange(cx: number, cy: number): [number, number] {
    const cell = cy * this.cols + cx;
    return [this.starts[cell], this.starts[cell + 1]];
  }

  /** Point indices inside an axis-aligned box (inclusive bounds). */
  queryBox(x0: number, y0: number, x1: number, y1: number): number[] {
    const xLo = Math.min(x0, x1);
    const xHi = Math.max(x0, x1);
    const yLo = Math.min(y0, y1);
    const yHi = Math.max(y0, y1);
    const out: number[] = [];
    const cLo = this.clampCol(xLo);
    const cHi = this.clampCol(xHi);
    const rLo = this.clampRow(yLo);
    const rHi = this.clampRow(yHi);
    const { x, y } = this.points;
    for (let cy = rLo; cy <= rHi; cy++) {
      for (let cx = cLo; cx <= cHi; cx++) {
        const [lo, hi] = this.cellRange(cx, cy);
        for (let p = lo; p < hi; p++) {
          const k = this.cells[p];
          if (x[k] >= xLo && x[k] <= xHi && y[k] >= yLo && y[k] <= yHi) {
            out.push(k);
          }
        }
      }
    }
    return out;
  }

  /** Nearest point within the radius, or null. */
  nearest(px: number, py: number, radius: number): number | null {
    const candidates = this.queryBox(px - radius, py - radius, px + radius, py + radius);
    let best: number | null = null;
    let bestD2 = radius * radius;
    for (const k of candidates) {
      const dx = this.points.x[k] - px;
      const dy = this.points.y[k] - py;
      const d2 = dx * dx + dy * dy;
      if (d2 <= bestD2) {
        bestD2 = d2;
        best = k;
      }
    }
    return best;
  }

  private clampCol(x: number): number {
    return Math.min(
      this.cols - 1,
      Math.max(0, Math.floor((x - this.bounds.xMin) / this.cellW)),
    );
  }

  private clampRow(y: number): number {
    return Math.min(
      this.rows - 1,
      Math.max(0, Math.floor((y - this.bounds.yMin) / this.cellH)),
    );
  }
}

/** Even-stride decimation for overview rendering of huge point clouds. */
export function decimate(points: PointSet, maxCount: number): Uint32Array {
  if (points.n <= maxCount) {
    const all = new Uint32Array(points.n);
    for (let k = 0; k < points.n; k++) all[k] = k;
    return all;
  }
  const out = new Uint32Array(maxCount);
  const stride = points.n / maxCount;
  for (let k = 0; k < maxCount; k++) out[k] = Math.floor(k * stride);
  return out;
}

/** Point-in-polygon (even-odd rule) for lasso selection. */
export function pointsInPolygon(
  points: PointSet,
  polygon: { x: number; y: number }[],
): number[] {
  if (polygon.length < 3) return [];
  let xLo = Infinity;
  let xHi = -Infinity;
  let yLo = Infinity;
  let yHi = -Infinity;
  for (const v of polygon) {
    xLo = Math.min(xLo, v.x);
    xHi = Math.max(xHi, v.x);
    yLo = Math.min(yLo, v.y);
    yHi = Math.max(yHi, v.y);
  }
  const out: number[] = [];
  for (let k = 0; k < points.n; k++) {
    const px = points.x[k];
    const py = points.y[k];
    if (px < xLo || px > xHi || py < yLo || py > yHi) continue;
    let inside = false;
    for (let i = 0, j = polygon.length - 1; i < polygon.length; j = i++) {
      const xi = polygon[i].x;
      const yi = polygon[i].y;
      const xj = polygon[j].x;
      const yj = polygon[j].y;
      if (yi > py !== yj > py) {
        const cross = ((xj - xi) * (py - yi)) / (yj - yi) + xi;
        if (px < cross) inside = !inside;
      }
    }
    if (inside) out.push(k);
  }
  return out;
}

/** Unique frame ids for a set of point indices (force plots fan out 3N). */
export function framesOf(points: PointSet, indices: Iterable<number>): number[] {
  const seen = new Set<number>();
  for (const k of indices) seen.add(points.frame[k]);
  return [...seen].sort((a, b) => a - b);
}
