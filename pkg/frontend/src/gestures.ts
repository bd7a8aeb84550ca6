/** Pointer-gesture interpretation in edit mode.
 *
 * Left-drag draws a box or lasso whose enclosed frames are selected;
 * left-click toggles the nearest point within the hit radius; right-click
 * deselects it.  Every mutation goes through the service client; gestures
 * outside the plot bounds are ignored. */

import type { ServiceClient } from './api.js';
import type { SelectionStore } from './state.js';
import {
  Bounds,
  PointSet,
  SpatialGrid,
  framesOf,
  pointsInPolygon,
} from './scatter.js';

export type DragShape = 'box' | 'lasso';

export interface GestureOptions {
  hitRadius: number;
  shape: DragShape;
  /** Minimum drag extent (data units) below which a drag counts as a click. */
  clickSlop: number;
}

interface DragState {
  path: { x: number; y: number }[];
}

export class GestureController {
  private drag: DragState | null = null;

  constructor(
    private readonly client: ServiceClient,
    private readonly store: SelectionStore,
    private points: PointSet,
    private grid: SpatialGrid,
    private bounds: Bounds,
    readonly options: GestureOptions,
    private editMode: () => boolean,
  ) {}

  /** Swap in a new point set after a re-fetch (delete/undo/data change). */
  setPoints(points: PointSet, grid: SpatialGrid, bounds: Bounds): void {
    this.points = points;
    this.grid = grid;
    this.bounds = bounds;
    this.drag = null;
  }

  private inBounds(x: number, y: number): boolean {
    return (
      x >= this.bounds.xMin &&
      x <= this.bounds.xMax &&
      y >= this.bounds.yMin &&
      y <= this.bounds.yMax
    );
  }

  pointerDown(x: number, y: number): void {
    if (!this.editMode() || !this.inBounds(x, y)) return;
    this.drag = { path: [{ x, y }] };
  }

  pointerMove(x: number, y: number): void {
    if (!this.drag) return;
    this.drag.path.push({ x, y });
  }

  /** Finish a drag; resolves once the service acknowledged the mutation. */
  async pointerUp(x: number, y: number): Promise<void> {
    if (!this.editMode()) return;
    const drag = this.drag;
    this.drag = null;
    if (!drag) return;
    drag.path.push({ x, y });
    const start = drag.path[0];
    const spansX = Math.abs(x - start.x);
    const spansY = Math.abs(y - start.y);
    if (spansX < this.options.clickSlop && spansY < this.options.clickSlop) {
      await this.click(x, y);
      return;
    }
    let indices: number[];
    if (this.options.shape === 'box') {
      indices = this.grid.queryBox(start.x, start.y, x, y);
    } else {
      indices = pointsInPolygon(this.points, drag.path);
    }
    const frames = framesOf(this.points, indices);
    if (frames.length === 0) return;
    const flags = await this.client.selectIds(frames);
    this.store.applyFlags(flags);
  }

  /** Left-click: toggle the nearest point within the hit radius. */
  async click(x: number, y: number): Promise<void> {
    if (!this.editMode() || !this.inBounds(x, y)) return;
    const hit = this.grid.nearest(x, y, this.options.hitRadius);
    if (hit === null) return;
    const frame = this.points.frame[hit];
    const flags = this.store.isSelected(frame)
      ? await this.client.deselectIds([frame])
      : await this.client.selectIds([frame]);
    this.store.applyFlags(flags);
  }

  /** Right-click: deselect the nearest point within the hit radius. */
  async rightClick(x: number, y: number): Promise<void> {
    if (!this.editMode() || !this.inBounds(x, y)) return;
    const hit = this.grid.nearest(x, y, this.options.hitRadius);
    if (hit === null) return;
    const flags = await this.client.deselectIds([this.points.frame[hit]]);
    this.store.applyFlags(flags);
  }
}
