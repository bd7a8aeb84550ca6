/** Selection truth lives on the service; this store only mirrors the flag
 * summaries the service returns and fans them out to every linked view. */

import type { FlagState } from './types.js';

export type FlagListener = (store: SelectionStore) => void;

export class SelectionStore {
  selected: Set<number> = new Set();
  matched: Set<number> = new Set();
  frames = 0;

  private listeners: FlagListener[] = [];

  subscribe(listener: FlagListener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  /** The single entry point for flag changes: a service response. */
  applyFlags(flags: FlagState): void {
    this.frames = flags.frames;
    this.selected = new Set(flags.selected);
    this.matched = new Set(flags.matched);
    this.notify();
  }

  /** Dataset shape changed (delete/undo); callers re-fetch plots, flags reset
   * until the next summary arrives. */
  reset(frames: number): void {
    this.frames = frames;
    this.selected = new Set();
    this.matched = new Set();
    this.notify();
  }

  isSelected(frame: number): boolean {
    return this.selected.has(frame);
  }

  isMatched(frame: number): boolean {
    return this.matched.has(frame);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this);
  }
}
