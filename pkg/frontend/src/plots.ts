/** Linked-subplot coordination: four views over one selection store.
 *
 * Selected frames paint red in every subplot; search matches paint green in
 * the main plot only; clicking a point makes it the current frame.  All
 * state changes arrive as service flag summaries through the store. */

import type { ServiceClient } from './api.js';
import { SelectionStore } from './state.js';
import {
  Bounds,
  PointSet,
  SpatialGrid,
  boundsOf,
  decimate,
  fromPlotPayload,
} from './scatter.js';
import {
  BASE_COLOR,
  MATCHED_COLOR,
  PlotKind,
  SELECTED_COLOR,
  ViewState,
} from './types.js';

export const OVERVIEW_BUDGET = 200_000;

export interface SubplotData {
  kind: PlotKind;
  points: PointSet;
  grid: SpatialGrid;
  bounds: Bounds;
  /** Decimated indices for the overview pass; full data serves brushing. */
  overview: Uint32Array;
}

export interface StyledPoint {
  index: number;
  frame: number;
  color: string;
}

export class LinkedPlots {
  readonly subplots = new Map<PlotKind, SubplotData>();
  private repaintCallbacks: ((kind: PlotKind) => void)[] = [];

  constructor(
    private readonly client: ServiceClient,
    readonly store: SelectionStore,
    public view: ViewState,
  ) {
    store.subscribe(() => this.repaintAll());
  }

  onRepaint(callback: (kind: PlotKind) => void): void {
    this.repaintCallbacks.push(callback);
  }

  private repaintAll(): void {
    for (const kind of this.subplots.keys()) {
      for (const callback of this.repaintCallbacks) callback(kind);
    }
  }

  async loadKind(kind: PlotKind): Promise<SubplotData> {
    const payload = await this.client.getPlot(kind);
    const points = fromPlotPayload(payload);
    const data: SubplotData = {
      kind,
      points,
      grid: new SpatialGrid(points),
      bounds: boundsOf(points),
      overview: decimate(points, OVERVIEW_BUDGET),
    };
    this.subplots.set(kind, data);
    return data;
  }

  async loadAll(): Promise<void> {
    for (const kind of this.view.subplotKinds) {
      if (!this.subplots.has(kind)) {
        await this.loadKind(kind);
      }
    }
  }

  /** Drop cached plot data (after delete/undo) and reload. */
  async refresh(): Promise<void> {
    this.subplots.clear();
    await this.loadAll();
    this.repaintAll();
  }

  /** Color of one point in one subplot under the current flags. */
  colorFor(kind: PlotKind, frame: number): string {
    if (this.store.isSelected(frame)) return SELECTED_COLOR;
    if (kind === this.view.mainKind && this.store.isMatched(frame)) {
      return MATCHED_COLOR;
    }
    return BASE_COLOR;
  }

  /** Styled overview points for a subplot, ready for the renderer. */
  styledPoints(kind: PlotKind): StyledPoint[] {
    const data = this.subplots.get(kind);
    if (!data) return [];
    const out: StyledPoint[] = [];
    for (const index of data.overview) {
      const frame = data.points.frame[index];
      out.push({ index, frame, color: this.colorFor(kind, frame) });
    }
    return out;
  }

  /** Clicking a point (any subplot, any mode) focuses its frame. */
  focusPoint(kind: PlotKind, x: number, y: number, hitRadius: number): number | null {
    const data = this.subplots.get(kind);
    if (!data) return null;
    const hit = data.grid.nearest(x, y, hitRadius);
    if (hit === null) return null;
    this.view = { ...this.view, currentFrame: data.points.frame[hit] };
    return this.view.currentFrame;
  }

  /** Run the config-type search; matches highlight without selecting. */
  async search(pattern: string, mode: 'prefix' | 'suffix' | 'contains'): Promise<void> {
    const flags = await this.client.applyTool('search_config_type', {
      pattern,
      mode,
    });
    this.store.applyFlags(flags);
  }

  /** Toolbar Select/Deselect buttons act on the current matched set. */
  async selectMatched(): Promise<void> {
    const ids = [...this.store.matched];
    if (ids.length === 0) return;
    this.store.applyFlags(await this.client.selectIds(ids));
  }

  async deselectMatched(): Promise<void> {
    const ids = [...this.store.matched];
    if (ids.length === 0) return;
    this.store.applyFlags(await this.client.deselectIds(ids));
  }

  async runFps(maxCount: number, minDistance = 0): Promise<void> {
    this.store.applyFlags(
      await this.client.applyTool('fps', {
        max_count: maxCount,
        min_distance: minDistance,
      }),
    );
  }

  async runMaxError(n: number): Promise<void> {
    this.store.applyFlags(
      await this.client.applyTool('max_error', { kind: this.view.mainKind, n }),
    );
  }

  async runNonphysical(coeff?: number): Promise<void> {
    const params: Record<string, unknown> = {};
    if (coeff !== undefined) params.coeff = coeff;
    this.store.applyFlags(await this.client.applyTool('nonphysical', params));
  }

  async deleteSelected(): Promise<void> {
    const report = await this.client.deleteSelected();
    this.store.reset(report.remaining);
    await this.refresh();
  }

  async undo(): Promise<void> {
    const report = await this.client.undo();
    this.store.reset(report.remaining);
    await this.refresh();
  }
}
