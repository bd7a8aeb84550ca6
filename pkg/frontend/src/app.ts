/** Browser entry point: builds the four linked subplots, the curation
 * toolbar, config-type search, and the structure viewer on top of the
 * service API.  Service failures surface as a banner; no local state is
 * lost because none is authoritative here. */

import { ServiceClient, ServiceUnreachableError, httpTransport } from './api.js';
import { GestureController } from './gestures.js';
import { LinkedPlots } from './plots.js';
import { padBounds } from './scatter.js';
import {
  DataTransform,
  WebGlPointRenderer,
  drawPoints2d,
  drawStructure2d,
  makeTransform,
} from './render.js';
import { SelectionStore } from './state.js';
import { CameraConfig, DisplayMode, projectScene } from './structure.js';
import { PlotKind, defaultViewState, setMainKind } from './types.js';

const SUBPLOT_SIZE = 360;
const HIT_RADIUS_FRACTION = 0.02;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  parent?: HTMLElement,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  parent?.appendChild(node);
  return node;
}

function banner(message: string): void {
  let bar = document.getElementById('banner');
  if (!bar) {
    bar = el('div', { id: 'banner' }, document.body);
    bar.style.cssText =
      'position:fixed;top:0;left:0;right:0;background:#c92a2a;color:#fff;' +
      'padding:6px 12px;font-family:sans-serif;z-index:10;';
  }
  bar.textContent = message;
  bar.style.display = 'block';
  setTimeout(() => {
    if (bar) bar.style.display = 'none';
  }, 5000);
}

async function guarded<T>(action: () => Promise<T>): Promise<T | undefined> {
  try {
    return await action();
  } catch (err) {
    if (err instanceof ServiceUnreachableError) {
      banner('Service unreachable; the view is unchanged.');
    } else {
      banner(String(err instanceof Error ? err.message : err));
    }
    return undefined;
  }
}

interface SubplotWidget {
  kind: PlotKind;
  canvas: HTMLCanvasElement;
  gestures: GestureController;
  transform: DataTransform | null;
  gl: WebGlPointRenderer | null;
}

export async function boot(root: HTMLElement): Promise<void> {
  const base = new URLSearchParams(window.location.search).get('service')
    ?? `${window.location.protocol}//${window.location.host}`;
  const transport = httpTransport(base);
  const opened = await guarded(() => ServiceClient.open(transport));
  if (!opened) return;
  const { client, info } = opened;

  const store = new SelectionStore();
  store.reset(info.frames);
  const plots = new LinkedPlots(client, store, defaultViewState());

  const toolbar = el('div', { id: 'toolbar' }, root);
  toolbar.style.cssText = 'display:flex;gap:8px;padding:8px;flex-wrap:wrap;';
  const grid = el('div', { id: 'plots' }, root);
  grid.style.cssText =
    `display:grid;grid-template-columns:repeat(2, ${SUBPLOT_SIZE}px);gap:8px;padding:8px;`;
  const sidebar = el('div', { id: 'structure' }, root);
  sidebar.style.cssText = 'padding:8px;';

  const widgets: SubplotWidget[] = [];
  const structureCanvas = el('canvas', {
    width: String(SUBPLOT_SIZE),
    height: String(SUBPLOT_SIZE),
  }, sidebar);
  let displayMode: DisplayMode = 'ball-and-stick';
  const camera: CameraConfig = {
    mode: 'perspective',
    yaw: 0.6,
    pitch: 0.35,
    distance: 4,
  };

  async function showFrame(frame: number): Promise<void> {
    const view = await guarded(() => client.getStructure(frame));
    if (!view) return;
    const scene = projectScene(view, displayMode, camera);
    const ctx = structureCanvas.getContext('2d');
    if (ctx) drawStructure2d(ctx, scene, structureCanvas.width, structureCanvas.height);
  }

  function repaint(kind: PlotKind): void {
    const widget = widgets.find((w) => w.kind === kind);
    const data = plots.subplots.get(kind);
    if (!widget || !data) return;
    widget.transform = makeTransform(data.bounds, widget.canvas.width, widget.canvas.height);
    const styled = plots.styledPoints(kind);
    if (widget.gl) {
      widget.gl.draw(data.points, styled, data.bounds);
    } else {
      const ctx = widget.canvas.getContext('2d');
      if (ctx) drawPoints2d(ctx, data.points, styled, widget.transform);
    }
  }
  plots.onRepaint(repaint);

  await guarded(() => plots.loadAll());

  for (const kind of plots.view.subplotKinds) {
    const data = plots.subplots.get(kind);
    if (!data) continue;
    const canvas = el('canvas', {
      width: String(SUBPLOT_SIZE),
      height: String(SUBPLOT_SIZE),
      title: kind,
    }, grid);
    canvas.style.cssText = 'border:1px solid #dee2e6;';
    const hitRadius =
      HIT_RADIUS_FRACTION *
      Math.max(data.bounds.xMax - data.bounds.xMin, data.bounds.yMax - data.bounds.yMin, 1e-12);
    const gestures = new GestureController(
      client,
      store,
      data.points,
      data.grid,
      padBounds(data.bounds),
      { hitRadius, shape: 'box', clickSlop: hitRadius / 2 },
      () => plots.view.mode === 'edit' && plots.view.mainKind === kind,
    );
    let gl: WebGlPointRenderer | null = null;
    try {
      gl = new WebGlPointRenderer(canvas);
    } catch {
      gl = null; // 2D fallback
    }
    const widget: SubplotWidget = { kind, canvas, gestures, transform: null, gl };
    widgets.push(widget);

    const toData = (event: MouseEvent): [number, number] => {
      const rect = canvas.getBoundingClientRect();
      const t = widget.transform;
      if (!t) return [NaN, NaN];
      return [t.toDataX(event.clientX - rect.left), t.toDataY(event.clientY - rect.top)];
    };
    canvas.addEventListener('mousedown', (event) => {
      if (event.button !== 0) return;
      const [x, y] = toData(event);
      gestures.pointerDown(x, y);
    });
    canvas.addEventListener('mousemove', (event) => {
      const [x, y] = toData(event);
      gestures.pointerMove(x, y);
    });
    canvas.addEventListener('mouseup', (event) => {
      const [x, y] = toData(event);
      if (event.button === 0) {
        void guarded(async () => {
          await gestures.pointerUp(x, y);
        });
        const frame = plots.focusPoint(kind, x, y, hitRadius);
        if (frame !== null) void showFrame(frame);
      }
    });
    canvas.addEventListener('contextmenu', (event) => {
      event.preventDefault();
      const [x, y] = toData(event);
      void guarded(() => gestures.rightClick(x, y));
    });
    canvas.addEventListener('click', () => {
      void guarded(async () => {
        plots.view = setMainKind(plots.view, kind);
        return undefined;
      });
    });
    repaint(kind);
  }

  // --- toolbar -------------------------------------------------------------
  const addButton = (label: string, action: () => void): HTMLButtonElement => {
    const button = el('button', {}, toolbar);
    button.textContent = label;
    button.addEventListener('click', action);
    return button;
  };

  const modeButton = addButton('mode: pan', () => {
    plots.view = {
      ...plots.view,
      mode: plots.view.mode === 'pan' ? 'edit' : 'pan',
    };
    modeButton.textContent = `mode: ${plots.view.mode}`;
  });

  const countInput = el('input', { type: 'number', value: '10' }, toolbar);
  addButton('max error', () => {
    void guarded(() => plots.runMaxError(Number(countInput.value)));
  });
  addButton('fps', () => {
    void guarded(() => plots.runFps(Number(countInput.value)));
  });
  addButton('non-physical', () => {
    void guarded(() => plots.runNonphysical());
  });
  addButton('invert', () => {
    void guarded(async () => {
      store.applyFlags(await client.applyTool('invert', {}));
    });
  });
  addButton('delete', () => {
    void guarded(() => plots.deleteSelected());
  });
  addButton('undo', () => {
    void guarded(() => plots.undo());
  });

  const searchInput = el('input', { type: 'text', placeholder: 'config_type' }, toolbar);
  const searchMode = el('select', {}, toolbar);
  for (const mode of ['contains', 'prefix', 'suffix']) {
    const option = el('option', { value: mode }, searchMode);
    option.textContent = mode;
  }
  addButton('search', () => {
    void guarded(() =>
      plots.search(searchInput.value, searchMode.value as 'prefix' | 'suffix' | 'contains'),
    );
  });
  addButton('select matched', () => {
    void guarded(() => plots.selectMatched());
  });
  addButton('deselect matched', () => {
    void guarded(() => plots.deselectMatched());
  });

  addButton('ball/stick <-> space-filling', () => {
    displayMode = displayMode === 'ball-and-stick' ? 'space-filling' : 'ball-and-stick';
    if (plots.view.currentFrame !== null) void showFrame(plots.view.currentFrame);
  });
  addButton('persp <-> ortho', () => {
    camera.mode = camera.mode === 'perspective' ? 'orthographic' : 'perspective';
    if (plots.view.currentFrame !== null) void showFrame(plots.view.currentFrame);
  });
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  void boot(document.getElementById('app')!);
}
