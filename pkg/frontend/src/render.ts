/** Canvas renderers.  The WebGL path draws point sprites from typed-array
 * buffers and carries million-point overviews; the 2D path is the fallback
 * and also draws the structure viewer. */

import type { Bounds, PointSet } from './scatter.js';
import type { StyledPoint } from './plots.js';
import type { ProjectedScene } from './structure.js';

export interface DataTransform {
  toScreenX(x: number): number;
  toScreenY(y: number): number;
  toDataX(px: number): number;
  toDataY(py: number): number;
}

export function makeTransform(
  bounds: Bounds,
  width: number,
  height: number,
  margin = 8,
): DataTransform {
  const spanX = bounds.xMax - bounds.xMin || 1;
  const spanY = bounds.yMax - bounds.yMin || 1;
  const sx = (width - 2 * margin) / spanX;
  const sy = (height - 2 * margin) / spanY;
  return {
    toScreenX: (x) => margin + (x - bounds.xMin) * sx,
    toScreenY: (y) => height - margin - (y - bounds.yMin) * sy,
    toDataX: (px) => bounds.xMin + (px - margin) / sx,
    toDataY: (py) => bounds.yMin + (height - margin - py) / sy,
  };
}

const VERTEX_SHADER = `
attribute vec2 position;
attribute vec3 color;
uniform vec4 viewBox;   // xMin, yMin, xSpan, ySpan
uniform float pointSize;
varying vec3 vColor;
void main() {
  vec2 unit = (position - viewBox.xy) / viewBox.zw;
  gl_Position = vec4(unit * 2.0 - 1.0, 0.0, 1.0);
  gl_PointSize = pointSize;
  vColor = color;
}
`;

const FRAGMENT_SHADER = `
precision mediump float;
varying vec3 vColor;
void main() {
  vec2 d = gl_PointCoord - vec2(0.5);
  if (dot(d, d) > 0.25) discard;
  gl_FragColor = vec4(vColor, 1.0);
}
`;

function hexToRgb(hex: string): [number, number, number] {
  const v = parseInt(hex.slice(1), 16);
  return [((v >> 16) & 255) / 255, ((v >> 8) & 255) / 255, (v & 255) / 255];
}

/** GPU point renderer; constructing it throws when WebGL is unavailable. */
export class WebGlPointRenderer {
  private readonly gl: WebGLRenderingContext;
  private readonly program: WebGLProgram;
  private readonly positionBuffer: WebGLBuffer;
  private readonly colorBuffer: WebGLBuffer;

  constructor(private readonly canvas: HTMLCanvasElement) {
    const gl = canvas.getContext('webgl');
    if (!gl) throw new Error('WebGL unavailable');
    this.gl = gl;
    const compile = (type: number, source: string): WebGLShader => {
      const shader = gl.createShader(type)!;
      gl.shaderSource(shader, source);
      gl.compileShader(shader);
      if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
        throw new Error(gl.getShaderInfoLog(shader) ?? 'shader error');
      }
      return shader;
    };
    const program = gl.createProgram()!;
    gl.attachShader(program, compile(gl.VERTEX_SHADER, VERTEX_SHADER));
    gl.attachShader(program, compile(gl.FRAGMENT_SHADER, FRAGMENT_SHADER));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error(gl.getProgramInfoLog(program) ?? 'link error');
    }
    this.program = program;
    this.positionBuffer = gl.createBuffer()!;
    this.colorBuffer = gl.createBuffer()!;
  }

  draw(
    points: PointSet,
    styled: StyledPoint[],
    bounds: Bounds,
    pointSize = 4,
  ): void {
    const gl = this.gl;
    const n = styled.length;
    const positions = new Float32Array(n * 2);
    const colors = new Float32Array(n * 3);
    styled.forEach((p, k) => {
      positions[2 * k] = points.x[p.index];
      positions[2 * k + 1] = points.y[p.index];
      const [r, g, b] = hexToRgb(p.color);
      colors[3 * k] = r;
      colors[3 * k + 1] = g;
      colors[3 * k + 2] = b;
    });

    gl.viewport(0, 0, this.canvas.width, this.canvas.height);
    gl.clearColor(1, 1, 1, 1);
    gl.clear(gl.COLOR_BUFFER_BIT);
    gl.useProgram(this.program);

    const viewBox = gl.getUniformLocation(this.program, 'viewBox');
    gl.uniform4f(
      viewBox,
      bounds.xMin,
      bounds.yMin,
      bounds.xMax - bounds.xMin || 1,
      bounds.yMax - bounds.yMin || 1,
    );
    gl.uniform1f(gl.getUniformLocation(this.program, 'pointSize'), pointSize);

    const positionLoc = gl.getAttribLocation(this.program, 'position');
    gl.bindBuffer(gl.ARRAY_BUFFER, this.positionBuffer);
    gl.bufferData(gl.ARRAY_BUFFER, positions, gl.DYNAMIC_DRAW);
    gl.enableVertexAttribArray(positionLoc);
    gl.vertexAttribPointer(positionLoc, 2, gl.FLOAT, false, 0, 0);

    const colorLoc = gl.getAttribLocation(this.program, 'color');
    gl.bindBuffer(gl.ARRAY_BUFFER, this.colorBuffer);
    gl.bufferData(gl.ARRAY_BUFFER, colors, gl.DYNAMIC_DRAW);
    gl.enableVertexAttribArray(colorLoc);
    gl.vertexAttribPointer(colorLoc, 3, gl.FLOAT, false, 0, 0);

    gl.drawArrays(gl.POINTS, 0, n);
  }
}

/** Canvas-2D fallback point renderer (fine below ~1e5 points). */
export function drawPoints2d(
  ctx: CanvasRenderingContext2D,
  points: PointSet,
  styled: StyledPoint[],
  transform: DataTransform,
  radius = 2.5,
): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  // group by color to minimize state changes
  const byColor = new Map<string, number[]>();
  for (const p of styled) {
    const bucket = byColor.get(p.color);
    if (bucket) bucket.push(p.index);
    else byColor.set(p.color, [p.index]);
  }
  for (const [color, indices] of byColor) {
    ctx.fillStyle = color;
    ctx.beginPath();
    for (const k of indices) {
      const sx = transform.toScreenX(points.x[k]);
      const sy = transform.toScreenY(points.y[k]);
      ctx.moveTo(sx + radius, sy);
      ctx.arc(sx, sy, radius, 0, 2 * Math.PI);
    }
    ctx.fill();
  }
}

export function drawStructure2d(
  ctx: CanvasRenderingContext2D,
  scene: ProjectedScene,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const scale = 0.38 * Math.min(width, height);
  const cx = width / 2;
  const cy = height / 2;
  const sx = (x: number) => cx + x * scale;
  const sy = (y: number) => cy - y * scale;

  for (const bond of scene.bonds) {
    ctx.strokeStyle = bond.color;
    ctx.lineWidth = bond.flagged ? 3 : 1.5;
    ctx.beginPath();
    ctx.moveTo(sx(bond.from[0]), sy(bond.from[1]));
    ctx.lineTo(sx(bond.to[0]), sy(bond.to[1]));
    ctx.stroke();
  }
  for (const atom of scene.atoms) {
    ctx.fillStyle = atom.color;
    ctx.strokeStyle = '#343a40';
    ctx.beginPath();
    ctx.arc(sx(atom.x), sy(atom.y), Math.max(2, atom.radius * scale), 0, 2 * Math.PI);
    ctx.fill();
    ctx.stroke();
  }
}
