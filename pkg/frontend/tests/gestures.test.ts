/** Edit-mode gestures: box/lasso selection, click toggle, right-click
 * deselect, out-of-bounds and pan-mode inertness. */

import { describe, expect, it } from 'vitest';

import { ServiceClient } from '../src/api.js';
import { GestureController } from '../src/gestures.js';
import { SelectionStore } from '../src/state.js';
import {
  SpatialGrid,
  boundsOf,
  fromPlotPayload,
  makePointSet,
  padBounds,
  pointsInPolygon,
} from '../src/scatter.js';
import { MockSession, gridFrames, mockTransport } from './mockService.js';

async function setup(frameCount = 25, shape: 'box' | 'lasso' = 'box') {
  const session = new MockSession(gridFrames(frameCount));
  const transport = mockTransport(session);
  const { client } = await ServiceClient.open(transport);
  const store = new SelectionStore();
  const points = fromPlotPayload(session.plot('descriptor'));
  const grid = new SpatialGrid(points);
  const bounds = padBounds(boundsOf(points));
  let editMode = true;
  const gestures = new GestureController(
    client,
    store,
    points,
    grid,
    bounds,
    { hitRadius: 0.3, shape, clickSlop: 0.05 },
    () => editMode,
  );
  return {
    session,
    client,
    store,
    gestures,
    points,
    setEdit: (on: boolean) => {
      editMode = on;
    },
  };
}

describe('box selection', () => {
  it('selects exactly the enclosed frames', async () => {
    const { session, gestures } = await setup();
    // grid frames live at integer coordinates (5 per row)
    gestures.pointerDown(-0.2, -0.2);
    gestures.pointerMove(1.0, 0.5);
    await gestures.pointerUp(1.2, 1.2);
    // box [-0.2, 1.2]^2 encloses (0,0), (1,0), (0,1), (1,1) -> frames 0,1,5,6
    expect([...session.selected].sort((a, b) => a - b)).toEqual([0, 1, 5, 6]);
  });

  it('an empty region issues no mutation', async () => {
    const { client, gestures } = await setup();
    gestures.pointerDown(10.5, 10.5);
    await gestures.pointerUp(11.5, 11.5);
    expect(client.log.filter((r) => r.method === 'POST')).toHaveLength(0);
  });

  it('does nothing in pan mode', async () => {
    const { client, gestures, setEdit } = await setup();
    setEdit(false);
    gestures.pointerDown(-0.5, -0.5);
    await gestures.pointerUp(2.5, 2.5);
    expect(client.log.filter((r) => r.method === 'POST')).toHaveLength(0);
  });

  it('ignores gestures that start outside the plot bounds', async () => {
    const { client, gestures } = await setup();
    gestures.pointerDown(-50, -50);
    await gestures.pointerUp(2, 2);
    expect(client.log.filter((r) => r.method === 'POST')).toHaveLength(0);
  });
});

describe('lasso selection', () => {
  it('selects frames inside the polygon', async () => {
    const { session, gestures } = await setup(25, 'lasso');
    gestures.pointerDown(-0.3, -0.3);
    gestures.pointerMove(2.5, -0.3);
    gestures.pointerMove(2.5, 0.5);
    await gestures.pointerUp(-0.3, 0.5);
    // band around y=0: frames 0..2 at (0..2, 0)
    expect([...session.selected].sort((a, b) => a - b)).toEqual([0, 1, 2]);
  });

  it('point-in-polygon handles a concave shape', () => {
    const points = makePointSet([0, 2, 4], [0, 0, 0]);
    const vee = [
      { x: -1, y: -1 },
      { x: 5, y: -1 },
      { x: 5, y: 1 },
      { x: 2, y: -0.5 },
      { x: -1, y: 1 },
    ];
    expect(pointsInPolygon(points, vee)).toEqual([0, 2]);
  });
});

describe('clicks', () => {
  it('left-click selects the nearest point, second click deselects it', async () => {
    const { session, store, client, gestures } = await setup();
    await gestures.click(1.1, 0.1);
    expect([...session.selected]).toEqual([1]);
    store.applyFlags(session.flagState());
    await gestures.click(1.1, 0.1);
    expect([...session.selected]).toEqual([]);
    const bodies = client.log
      .filter((r) => r.method === 'POST')
      .map((r) => (r.body as { tool: string }).tool);
    expect(bodies).toEqual(['select_ids', 'deselect_ids']);
  });

  it('a click with no point in radius is a no-op', async () => {
    const { client, gestures } = await setup();
    await gestures.click(0.5, 0.5); // centered between four grid points at d~0.7
    expect(client.log.filter((r) => r.method === 'POST')).toHaveLength(0);
  });

  it('right-click deselects and round-trips through the request log', async () => {
    const { session, store, client, gestures } = await setup();
    session.applyTool('select_ids', { ids: [3] });
    store.applyFlags(session.flagState());
    await gestures.rightClick(3.05, 0.0);
    expect(session.selected.has(3)).toBe(false);
    const last = client.log[client.log.length - 1];
    expect(last).toEqual({
      method: 'POST',
      path: '/api/tool',
      body: {
        session: 'mock',
        tool: 'deselect_ids',
        params: { ids: [3] },
      },
    });
  });

  it('a sub-slop drag counts as a click', async () => {
    const { session, gestures } = await setup();
    gestures.pointerDown(2.0, 0.01);
    await gestures.pointerUp(2.02, 0.02);
    expect([...session.selected]).toEqual([2]);
  });
});
