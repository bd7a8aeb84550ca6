/** Shared payload and view-state types mirroring the service JSON API. */

export type PlotKind = 'descriptor' | 'energy' | 'force' | 'virial' | 'stress';

export type ToolName =
  | 'fps'
  | 'max_error'
  | 'nonphysical'
  | 'select_ids'
  | 'deselect_ids'
  | 'search_config_type'
  | 'invert';

export interface SessionInfo {
  session: string;
  frames: number;
  kinds: string[];
  coverage_errors?: { frame: number; error: string }[];
}

export interface DescriptorPoint {
  frame: number;
  x: number;
  y: number;
  selected: boolean;
  matched: boolean;
}

export interface ParityPoint {
  frame: number;
  ref: number;
  pred: number;
  selected: boolean;
  matched: boolean;
}

export interface PlotPayload {
  kind: PlotKind;
  points: (DescriptorPoint | ParityPoint)[];
}

/** Flag summary the service returns after every mutation. */
export interface FlagState {
  frames: number;
  selected: number[];
  matched: number[];
}

export interface DeleteReport {
  removed: number[];
  remaining: number;
}

export interface UndoReport {
  restored: boolean;
  remaining: number;
}

export interface StructureAtom {
  element: string;
  position: [number, number, number];
  radius: number;
  color: string;
}

export interface StructureBond {
  i: number;
  j: number;
  shift: [number, number, number];
  distance: number;
  flagged: boolean;
}

export interface StructureView {
  frame: number;
  atoms: StructureAtom[];
  bonds: StructureBond[];
  min_distance: number | null;
  cell: number[][];
  periodic: boolean[];
}

export type SelectionMode = 'pan' | 'edit';

/** Client-side view configuration; never a source of selection truth. */
export interface ViewState {
  mainKind: PlotKind;
  subplotKinds: [PlotKind, PlotKind, PlotKind, PlotKind];
  mode: SelectionMode;
  currentFrame: number | null;
  pendingToolParams: Record<string, unknown>;
}

export const SELECTED_COLOR = '#e03131';
export const MATCHED_COLOR = '#2f9e44';
export const BASE_COLOR = '#4c6ef5';
export const FLAGGED_BOND_COLOR = '#e03131';
export const BOND_COLOR = '#868e96';

export function defaultViewState(): ViewState {
  return {
    mainKind: 'descriptor',
    subplotKinds: ['descriptor', 'energy', 'force', 'virial'],
    mode: 'pan',
    currentFrame: null,
    pendingToolParams: {},
  };
}

/** Swap a subplot kind, keeping the main kind inside the subplot set. */
export function setSubplotKind(
  state: ViewState,
  slot: number,
  kind: PlotKind,
): ViewState {
  const kinds = [...state.subplotKinds] as ViewState['subplotKinds'];
  const replaced = kinds[slot];
  kinds[slot] = kind;
  const mainKind = state.mainKind === replaced ? kind : state.mainKind;
  return { ...state, subplotKinds: kinds, mainKind };
}

export function setMainKind(state: ViewState, kind: PlotKind): ViewState {
  if (!state.subplotKinds.includes(kind)) {
    throw new Error(`main plot kind ${kind} is not one of the subplots`);
  }
  return { ...state, mainKind: kind };
}
