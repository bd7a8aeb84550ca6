/** Structure-view geometry: project atoms for ball-and-stick or
 * space-filling rendering under a perspective or orthographic camera.
 * Both toggles are pure view parameters; they never touch session state,
 * and bond flag colors come from the service payload verbatim. */

import {
  BOND_COLOR,
  FLAGGED_BOND_COLOR,
  StructureBond,
  StructureView,
} from './types.js';

export type DisplayMode = 'ball-and-stick' | 'space-filling';
export type CameraMode = 'perspective' | 'orthographic';

export interface CameraConfig {
  mode: CameraMode;
  /** Rotation about the vertical axis (radians). */
  yaw: number;
  /** Rotation about the horizontal axis (radians). */
  pitch: number;
  /** Distance of the eye from the structure center, in structure radii. */
  distance: number;
}

export interface ProjectedAtom {
  index: number;
  x: number;
  y: number;
  depth: number;
  radius: number;
  color: string;
}

export interface ProjectedBond {
  from: [number, number];
  to: [number, number];
  depth: number;
  color: string;
  flagged: boolean;
}

export interface ProjectedScene {
  atoms: ProjectedAtom[];
  bonds: ProjectedBond[];
}

const BALL_STICK_SCALE = 0.45;

export function bondColor(bond: StructureBond): string {
  return bond.flagged ? FLAGGED_BOND_COLOR : BOND_COLOR;
}

function rotate(
  p: [number, number, number],
  yaw: number,
  pitch: number,
): [number, number, number] {
  const [x, y, z] = p;
  const cy = Math.cos(yaw);
  const sy = Math.sin(yaw);
  const x1 = cy * x + sy * z;
  const z1 = -sy * x + cy * z;
  const cp = Math.cos(pitch);
  const sp = Math.sin(pitch);
  const y2 = cp * y - sp * z1;
  const z2 = sp * y + cp * z1;
  return [x1, y2, z2];
}

/** Project a structure payload into screen-space circles and segments.
 * Output coordinates are centered on the structure with unit scale; the
 * renderer maps them onto the canvas. */
export function projectScene(
  view: StructureView,
  display: DisplayMode,
  camera: CameraConfig,
): ProjectedScene {
  const n = view.atoms.length;
  const center: [number, number, number] = [0, 0, 0];
  for (const atom of view.atoms) {
    center[0] += atom.position[0] / Math.max(n, 1);
    center[1] += atom.position[1] / Math.max(n, 1);
    center[2] += atom.position[2] / Math.max(n, 1);
  }
  let extent = 1e-9;
  const rotated: [number, number, number][] = view.atoms.map((atom) => {
    const local: [number, number, number] = [
      atom.position[0] - center[0],
      atom.position[1] - center[1],
      atom.position[2] - center[2],
    ];
    const r = rotate(local, camera.yaw, camera.pitch);
    extent = Math.max(extent, Math.hypot(r[0], r[1], r[2]));
    return r;
  });

  const eye = camera.distance * extent;
  const project = (p: [number, number, number]): [number, number, number] => {
    if (camera.mode === 'orthographic' || eye === 0) {
      return [p[0] / extent, p[1] / extent, p[2] / extent];
    }
    const scale = eye / Math.max(eye - p[2], 1e-6);
    return [(p[0] * scale) / extent, (p[1] * scale) / extent, p[2] / extent];
  };

  const scaleFor = display === 'space-filling' ? 1.0 : BALL_STICK_SCALE;
  const atoms: ProjectedAtom[] = view.atoms.map((atom, k) => {
    const [x, y, depth] = project(rotated[k]);
    return {
      index: k,
      x,
      y,
      depth,
      radius: (atom.radius * scaleFor) / extent,
      color: atom.color,
    };
  });

  const bonds: ProjectedBond[] =
    display === 'space-filling'
      ? []
      : view.bonds.map((bond) => {
          const a = project(rotated[bond.i]);
          const b = project(rotated[bond.j]);
          return {
            from: [a[0], a[1]],
            to: [b[0], b[1]],
            depth: (a[2] + b[2]) / 2,
            color: bondColor(bond),
            flagged: bond.flagged,
          };
        });

  // painter's order: far first
  atoms.sort((a, b) => a.depth - b.depth);
  bonds.sort((a, b) => a.depth - b.depth);
  return { atoms, bonds };
}
