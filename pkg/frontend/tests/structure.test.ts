/** Structure viewer: display/camera toggles are pure view parameters and
 * bond flags color exactly as the service says. */

import { describe, expect, it } from 'vitest';

import { bondColor, projectScene } from '../src/structure.js';
import { FLAGGED_BOND_COLOR, BOND_COLOR, StructureView } from '../src/types.js';

const VIEW: StructureView = {
  frame: 0,
  atoms: [
    { element: 'Cs', position: [0, 0, 0], radius: 2.44, color: '#57178F' },
    { element: 'I', position: [3.4, 0, 0], radius: 1.39, color: '#940094' },
    { element: 'I', position: [0, 3.4, 0], radius: 1.39, color: '#940094' },
  ],
  bonds: [
    { i: 0, j: 1, shift: [0, 0, 0], distance: 3.4, flagged: false },
    { i: 0, j: 2, shift: [0, 0, 0], distance: 3.4, flagged: true },
  ],
  min_distance: 3.4,
  cell: [[10, 0, 0], [0, 10, 0], [0, 0, 10]],
  periodic: [true, true, true],
};

const CAMERA = { mode: 'perspective' as const, yaw: 0.5, pitch: 0.3, distance: 4 };

describe('projection', () => {
  it('ball-and-stick renders bonds, space-filling does not', () => {
    const sticks = projectScene(VIEW, 'ball-and-stick', CAMERA);
    expect(sticks.bonds).toHaveLength(2);
    const filling = projectScene(VIEW, 'space-filling', CAMERA);
    expect(filling.bonds).toHaveLength(0);
    expect(filling.atoms).toHaveLength(3);
  });

  it('space-filling uses full radii, ball-and-stick shrinks them', () => {
    const sticks = projectScene(VIEW, 'ball-and-stick', CAMERA);
    const filling = projectScene(VIEW, 'space-filling', CAMERA);
    const byIndex = (scene: typeof sticks) =>
      new Map(scene.atoms.map((a) => [a.index, a.radius]));
    const stickR = byIndex(sticks);
    const fillR = byIndex(filling);
    for (const k of [0, 1, 2]) {
      expect(fillR.get(k)!).toBeGreaterThan(stickR.get(k)!);
    }
  });

  it('flagged bonds are red verbatim from the payload', () => {
    const scene = projectScene(VIEW, 'ball-and-stick', CAMERA);
    const flagged = scene.bonds.filter((b) => b.flagged);
    const plain = scene.bonds.filter((b) => !b.flagged);
    expect(flagged).toHaveLength(1);
    expect(flagged[0].color).toBe(FLAGGED_BOND_COLOR);
    expect(plain[0].color).toBe(BOND_COLOR);
    expect(bondColor(VIEW.bonds[1])).toBe(FLAGGED_BOND_COLOR);
  });

  it('toggling camera or display mode never mutates the payload', () => {
    const before = JSON.stringify(VIEW);
    projectScene(VIEW, 'ball-and-stick', CAMERA);
    projectScene(VIEW, 'space-filling', { ...CAMERA, mode: 'orthographic' });
    projectScene(VIEW, 'ball-and-stick', { ...CAMERA, yaw: 2.2, pitch: -0.7 });
    expect(JSON.stringify(VIEW)).toBe(before);
  });

  it('orthographic projection preserves depth ordering without foreshortening', () => {
    const ortho = projectScene(VIEW, 'ball-and-stick', {
      ...CAMERA,
      mode: 'orthographic',
    });
    // painter's order: sorted by depth ascending
    const depths = ortho.atoms.map((a) => a.depth);
    expect([...depths].sort((a, b) => a - b)).toEqual(depths);
    // all projected coordinates stay within the unit viewport
    for (const atom of ortho.atoms) {
      expect(Math.abs(atom.x)).toBeLessThanOrEqual(1.0 + 1e-9);
      expect(Math.abs(atom.y)).toBeLessThanOrEqual(1.0 + 1e-9);
    }
  });

  it('perspective scales nearer atoms larger on screen than farther ones', () => {
    const twoAtoms: StructureView = {
      ...VIEW,
      atoms: [
        { element: 'Ar', position: [2, 0, 3], radius: 1.0, color: '#80D1E3' },
        { element: 'Ar', position: [0, 0, -3], radius: 1.0, color: '#80D1E3' },
      ],
      bonds: [],
    };
    const scene = projectScene(twoAtoms, 'space-filling', {
      mode: 'perspective',
      yaw: 0,
      pitch: 0,
      distance: 3,
    });
    const near = scene.atoms.find((a) => a.depth > 0)!;
    const far = scene.atoms.find((a) => a.depth < 0)!;
    expect(Math.abs(near.x)).toBeGreaterThan(Math.abs(far.x));
  });
});
