/** In-memory stand-in for the curation service speaking the same JSON
 * contract, so UI logic tests can assert request-log equivalence without a
 * live backend. */

import type { RequestRecord, Transport } from '../src/api.js';
import type { FlagState, PlotPayload } from '../src/types.js';

export interface MockFrame {
  configType: string;
  x: number;
  y: number;
  energyRef: number;
  energyPred: number;
}

export class MockSession {
  frames: MockFrame[];
  selected = new Set<number>();
  matched = new Set<number>();
  private journal: { frames: MockFrame[]; selected: Set<number> }[] = [];

  constructor(frames: MockFrame[]) {
    this.frames = [...frames];
  }

  flagState(): FlagState {
    return {
      frames: this.frames.length,
      selected: [...this.selected].sort((a, b) => a - b),
      matched: [...this.matched].sort((a, b) => a - b),
    };
  }

  plot(kind: string): PlotPayload {
    const points = this.frames.map((frame, index) => {
      const flags = {
        frame: index,
        selected: this.selected.has(index),
        matched: this.matched.has(index),
      };
      if (kind === 'descriptor') {
        return { ...flags, x: frame.x, y: frame.y };
      }
      return { ...flags, ref: frame.energyRef, pred: frame.energyPred };
    });
    return { kind: kind as PlotPayload['kind'], points };
  }

  applyTool(tool: string, params: Record<string, unknown>): FlagState {
    switch (tool) {
      case 'select_ids':
        for (const id of params.ids as number[]) this.selected.add(id);
        break;
      case 'deselect_ids':
        for (const id of params.ids as number[]) this.selected.delete(id);
        break;
      case 'invert': {
        const next = new Set<number>();
        for (let k = 0; k < this.frames.length; k++) {
          if (!this.selected.has(k)) next.add(k);
        }
        this.selected = next;
        break;
      }
      case 'search_config_type': {
        const pattern = params.pattern as string;
        const mode = (params.mode as string) ?? 'contains';
        this.matched = new Set(
          this.frames
            .map((frame, index) => ({ frame, index }))
            .filter(({ frame }) => {
              if (mode === 'prefix') return frame.configType.startsWith(pattern);
              if (mode === 'suffix') return frame.configType.endsWith(pattern);
              return frame.configType.includes(pattern);
            })
            .map(({ index }) => index),
        );
        break;
      }
      default:
        throw new Error(`mock does not implement tool ${tool}`);
    }
    return this.flagState();
  }

  deleteSelected(): { removed: number[]; remaining: number } {
    const removed = [...this.selected].sort((a, b) => a - b);
    if (removed.length > 0) {
      this.journal.push({ frames: [...this.frames], selected: new Set(this.selected) });
      this.frames = this.frames.filter((_, index) => !this.selected.has(index));
      this.selected = new Set();
      this.matched = new Set();
    }
    return { removed, remaining: this.frames.length };
  }

  undo(): { restored: boolean; remaining: number } {
    const snapshot = this.journal.pop();
    if (!snapshot) return { restored: false, remaining: this.frames.length };
    this.frames = snapshot.frames;
    this.selected = snapshot.selected;
    return { restored: true, remaining: this.frames.length };
  }
}

export function mockTransport(session: MockSession): Transport {
  return async (record: RequestRecord) => {
    const [path, query] = record.path.split('?');
    const params = new URLSearchParams(query ?? '');
    if (record.method === 'GET' && path === '/api/session') {
      return {
        session: 'mock',
        frames: session.frames.length,
        kinds: ['descriptor', 'energy', 'force', 'virial'],
      };
    }
    if (record.method === 'GET' && path.startsWith('/api/plot/')) {
      void params;
      return session.plot(path.split('/')[3]);
    }
    if (record.method === 'POST' && path === '/api/tool') {
      const body = record.body as { tool: string; params: Record<string, unknown> };
      return session.applyTool(body.tool, body.params);
    }
    if (record.method === 'POST' && path === '/api/delete') {
      return session.deleteSelected();
    }
    if (record.method === 'POST' && path === '/api/undo') {
      return session.undo();
    }
    throw new Error(`mock has no route for ${record.method} ${record.path}`);
  };
}

export function gridFrames(count: number): MockFrame[] {
  const frames: MockFrame[] = [];
  const side = Math.ceil(Math.sqrt(count));
  for (let k = 0; k < count; k++) {
    frames.push({
      configType: `perturb_${k % 3 === 0 ? 'cubic' : 'ortho'}_${k}`,
      x: k % side,
      y: Math.floor(k / side),
      energyRef: -1 - k * 0.01,
      energyPred: -1 - k * 0.01 + (k % 5) * 0.001,
    });
  }
  return frames;
}
