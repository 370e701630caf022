/**
 * WebGL point/edge renderer.  All per-point attributes upload once at load
 * time in a single batch; per-frame work is uniform updates plus one draw
 * call for points (and one for edges when shown).  Cluster display state
 * lives in a numClusters-wide texture the vertex shader indexes into, so a
 * highlight re-uploads a handful of texels, never a per-point buffer.  The
 * year filter owns the only per-point update path: swapping the visibility
 * buffer in one bufferSubData call.
 */

import type { BundledEdge, Camera, PointsBlock } from './types.js';
import type { ClusterStateTable } from './clusterTable.js';

/** Above this many edges the edge layer starts hidden. */
export const EDGE_AUTO_HIDE_THRESHOLD = 50_000;

/** Whether the edge layer should start visible for a dataset of this size. */
export function edgesVisibleByDefault(edgeCount: number): boolean {
  return edgeCount <= EDGE_AUTO_HIDE_THRESHOLD;
}

const POINT_VS = `
precision highp float;
attribute vec2 a_position;
attribute float a_size;
attribute float a_clusterIndex;
attribute float a_visible;
uniform vec2 u_center;
uniform float u_zoom;
uniform vec2 u_viewport;
uniform sampler2D u_clusterTex;
uniform float u_numClusters;
varying vec4 v_color;

void main() {
  if (a_visible < 0.5) {
    gl_Position = vec4(2.0, 2.0, 2.0, 1.0); // outside clip space
    gl_PointSize = 0.0;
    v_color = vec4(0.0);
    return;
  }
  vec2 screen = (a_position - u_center) * u_zoom + 0.5 * u_viewport;
  vec2 ndc = vec2(2.0 * screen.x / u_viewport.x - 1.0, 1.0 - 2.0 * screen.y / u_viewport.y);
  gl_Position = vec4(ndc, 0.0, 1.0);

  vec3 rgb = vec3(0.62, 0.62, 0.62); // noise points stay gray
  float state = 0.0;                 // 0 normal, 1 highlighted, 2 dimmed
  if (a_clusterIndex >= 0.0 && u_numClusters > 0.0) {
    vec4 texel = texture2D(u_clusterTex, vec2((a_clusterIndex + 0.5) / u_numClusters, 0.5));
    rgb = texel.rgb;
    state = floor(texel.a * 255.0 + 0.5);
  }
  float alpha = 0.85;
  float sizeBoost = 1.0;
  if (state == 1.0) { alpha = 1.0; sizeBoost = 1.6; }
  if (state == 2.0) { alpha = 0.12; }
  gl_PointSize = max(2.0, a_size * sizeBoost * clamp(u_zoom * 0.05, 0.5, 3.0));
  v_color = vec4(rgb, alpha);
}
`;

const POINT_FS = `
precision mediump float;
varying vec4 v_color;

void main() {
  vec2 d = gl_PointCoord - vec2(0.5);
  if (dot(d, d) > 0.25) discard; // round sprite
  gl_FragColor = v_color;
}
`;

const EDGE_VS = `
precision highp float;
attribute vec2 a_position;
attribute float a_alpha;
uniform vec2 u_center;
uniform float u_zoom;
uniform vec2 u_viewport;
varying float v_alpha;

void main() {
  vec2 screen = (a_position - u_center) * u_zoom + 0.5 * u_viewport;
  vec2 ndc = vec2(2.0 * screen.x / u_viewport.x - 1.0, 1.0 - 2.0 * screen.y / u_viewport.y);
  gl_Position = vec4(ndc, 0.0, 1.0);
  v_alpha = a_alpha;
}
`;

const EDGE_FS = `
precision mediump float;
varying float v_alpha;

void main() {
  gl_FragColor = vec4(0.35, 0.42, 0.55, v_alpha);
}
`;

function compile(gl: WebGLRenderingContext, type: number, source: string): WebGLShader {
  const shader = gl.createShader(type);
  if (!shader) throw new Error('failed to create shader');
  gl.shaderSource(shader, source);
  gl.compileShader(shader);
  if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
    throw new Error(`shader compile failed: ${gl.getShaderInfoLog(shader)}`);
  }
  return shader;
}

function link(gl: WebGLRenderingContext, vs: string, fs: string): WebGLProgram {
  const program = gl.createProgram();
  if (!program) throw new Error('failed to create program');
  gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, vs));
  gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, fs));
  gl.linkProgram(program);
  if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
    throw new Error(`program link failed: ${gl.getProgramInfoLog(program)}`);
  }
  return program;
}

/** Deterministic categorical color for a cluster id (golden-angle hue walk). */
export function clusterColor(clusterId: number): [number, number, number] {
  const hue = ((clusterId * 137.50776405003785) % 360) / 360;
  const s = 0.62;
  const l = 0.55;
  return hslToRgb(hue, s, l);
}

function hslToRgb(h: number, s: number, l: number): [number, number, number] {
  const q = l < 0.5 ? l * (1 + s) : l + s - l * s;
  const p = 2 * l - q;
  const f = (t: number): number => {
    let u = t;
    if (u < 0) u += 1;
    if (u > 1) u -= 1;
    if (u < 1 / 6) return p + (q - p) * 6 * u;
    if (u < 1 / 2) return q;
    if (u < 2 / 3) return p + (q - p) * (2 / 3 - u) * 6;
    return p;
  };
  return [f(h + 1 / 3), f(h), f(h - 1 / 3)];
}

export class MapRenderer {
  private readonly gl: WebGLRenderingContext;
  private readonly pointProgram: WebGLProgram;
  private readonly edgeProgram: WebGLProgram;
  private readonly clusterTex: WebGLTexture;
  private readonly clusterIndexOf: Map<number, number>;
  private readonly texData: Uint8Array;
  private readonly n: number;
  private visibilityBuffer: WebGLBuffer;
  private edgeVertexCount = 0;
  private edgeBuffer: WebGLBuffer | null = null;
  showEdges = true;

  private buffers: { position: WebGLBuffer; size: WebGLBuffer; clusterIndex: WebGLBuffer };

  constructor(
    private readonly canvas: HTMLCanvasElement,
    block: PointsBlock,
    private readonly table: ClusterStateTable,
  ) {
    const gl = canvas.getContext('webgl', { antialias: true });
    if (!gl) throw new Error('WebGL is not available');
    this.gl = gl;
    this.n = block.n;
    this.pointProgram = link(gl, POINT_VS, POINT_FS);
    this.edgeProgram = link(gl, EDGE_VS, EDGE_FS);

    this.clusterIndexOf = new Map(table.ids.map((cid, i) => [cid, i]));
    const clusterIndex = new Float32Array(block.n);
    for (let i = 0; i < block.n; i++) {
      const cid = block.clusters[i];
      clusterIndex[i] = cid === -1 ? -1 : this.clusterIndexOf.get(cid) ?? -1;
    }

    this.buffers = {
      position: this.uploadInterleavedXY(block.xs, block.ys),
      size: this.upload(block.sizes),
      clusterIndex: this.upload(clusterIndex),
    };
    const visible = new Float32Array(block.n);
    visible.fill(1);
    this.visibilityBuffer = this.upload(visible, gl.DYNAMIC_DRAW);

    // One RGBA texel per cluster: rgb = categorical color, a = display state.
    const width = Math.max(1, table.size);
    this.texData = new Uint8Array(width * 4);
    const tex = gl.createTexture();
    if (!tex) throw new Error('failed to create cluster texture');
    this.clusterTex = tex;
    gl.bindTexture(gl.TEXTURE_2D, tex);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.NEAREST);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.NEAREST);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_S, gl.CLAMP_TO_EDGE);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_T, gl.CLAMP_TO_EDGE);
    this.syncClusterTexture();

    gl.enable(gl.BLEND);
    gl.blendFunc(gl.SRC_ALPHA, gl.ONE_MINUS_SRC_ALPHA);
    gl.clearColor(0.98, 0.98, 0.99, 1.0);
  }

  private upload(data: Float32Array, usage?: number): WebGLBuffer {
    const gl = this.gl;
    const buf = gl.createBuffer();
    if (!buf) throw new Error('failed to create buffer');
    gl.bindBuffer(gl.ARRAY_BUFFER, buf);
    gl.bufferData(gl.ARRAY_BUFFER, data, usage ?? gl.STATIC_DRAW);
    return buf;
  }

  private uploadInterleavedXY(xs: Float32Array, ys: Float32Array): WebGLBuffer {
    const interleaved = new Float32Array(xs.length * 2);
    for (let i = 0; i < xs.length; i++) {
      interleaved[2 * i] = xs[i];
      interleaved[2 * i + 1] = ys[i];
    }
    return this.upload(interleaved);
  }

  /** Re-read the cluster table into the state texture (a few texels, not per-point data). */
  syncClusterTexture(): void {
    const gl = this.gl;
    const snapshot = this.table.snapshot();
    this.table.ids.forEach((cid, i) => {
      const [r, g, b] = clusterColor(cid);
      const state = snapshot.get(cid);
      this.texData[4 * i] = Math.round(255 * r);
      this.texData[4 * i + 1] = Math.round(255 * g);
      this.texData[4 * i + 2] = Math.round(255 * b);
      this.texData[4 * i + 3] = state === 'highlighted' ? 1 : state === 'dimmed' ? 2 : 0;
    });
    gl.bindTexture(gl.TEXTURE_2D, this.clusterTex);
    gl.texImage2D(
      gl.TEXTURE_2D,
      0,
      gl.RGBA,
      Math.max(1, this.table.size),
      1,
      0,
      gl.RGBA,
      gl.UNSIGNED_BYTE,
      this.texData,
    );
  }

  /** Swap in a finished visibility mask (single buffer update). */
  setVisibility(mask: Uint8Array): void {
    const gl = this.gl;
    const data = new Float32Array(mask.length);
    for (let i = 0; i < mask.length; i++) data[i] = mask[i];
    gl.bindBuffer(gl.ARRAY_BUFFER, this.visibilityBuffer);
    gl.bufferSubData(gl.ARRAY_BUFFER, 0, data);
  }

  /** Build the edge layer; edges above the threshold start hidden. */
  setEdges(edges: BundledEdge[]): void {
    const gl = this.gl;
    let segments = 0;
    for (const e of edges) segments += Math.max(0, e.points.length - 1);
    const data = new Float32Array(segments * 2 * 3); // two vertices x (x, y, alpha)
    let maxWeight = 1;
    for (const e of edges) maxWeight = Math.max(maxWeight, e.weight);
    let k = 0;
    for (const e of edges) {
      const alpha = 0.08 + 0.3 * (e.weight / maxWeight);
      for (let i = 0; i + 1 < e.points.length; i++) {
        data[k++] = e.points[i][0];
        data[k++] = e.points[i][1];
        data[k++] = alpha;
        data[k++] = e.points[i + 1][0];
        data[k++] = e.points[i + 1][1];
        data[k++] = alpha;
      }
    }
    this.edgeBuffer = this.upload(data);
    this.edgeVertexCount = segments * 2;
    this.showEdges = edgesVisibleByDefault(edges.length);
  }

  draw(camera: Camera): void {
    const gl = this.gl;
    const w = this.canvas.width;
    const h = this.canvas.height;
    gl.viewport(0, 0, w, h);
    gl.clear(gl.COLOR_BUFFER_BIT);

    if (this.showEdges && this.edgeBuffer && this.edgeVertexCount > 0) {
      gl.useProgram(this.edgeProgram);
      gl.uniform2f(gl.getUniformLocation(this.edgeProgram, 'u_center'), camera.x, camera.y);
      gl.uniform1f(gl.getUniformLocation(this.edgeProgram, 'u_zoom'), camera.zoom);
      gl.uniform2f(gl.getUniformLocation(this.edgeProgram, 'u_viewport'), w, h);
      gl.bindBuffer(gl.ARRAY_BUFFER, this.edgeBuffer);
      const posLoc = gl.getAttribLocation(this.edgeProgram, 'a_position');
      const alphaLoc = gl.getAttribLocation(this.edgeProgram, 'a_alpha');
      gl.enableVertexAttribArray(posLoc);
      gl.vertexAttribPointer(posLoc, 2, gl.FLOAT, false, 12, 0);
      gl.enableVertexAttribArray(alphaLoc);
      gl.vertexAttribPointer(alphaLoc, 1, gl.FLOAT, false, 12, 8);
      gl.drawArrays(gl.LINES, 0, this.edgeVertexCount);
    }

    gl.useProgram(this.pointProgram);
    gl.uniform2f(gl.getUniformLocation(this.pointProgram, 'u_center'), camera.x, camera.y);
    gl.uniform1f(gl.getUniformLocation(this.pointProgram, 'u_zoom'), camera.zoom);
    gl.uniform2f(gl.getUniformLocation(this.pointProgram, 'u_viewport'), w, h);
    gl.uniform1f(gl.getUniformLocation(this.pointProgram, 'u_numClusters'), this.table.size);
    gl.activeTexture(gl.TEXTURE0);
    gl.bindTexture(gl.TEXTURE_2D, this.clusterTex);
    gl.uniform1i(gl.getUniformLocation(this.pointProgram, 'u_clusterTex'), 0);

    this.bindAttrib(this.pointProgram, 'a_position', this.buffers.position, 2);
    this.bindAttrib(this.pointProgram, 'a_size', this.buffers.size, 1);
    this.bindAttrib(this.pointProgram, 'a_clusterIndex', this.buffers.clusterIndex, 1);
    this.bindAttrib(this.pointProgram, 'a_visible', this.visibilityBuffer, 1);
    gl.drawArrays(gl.POINTS, 0, this.n);
  }

  private bindAttrib(program: WebGLProgram, name: string, buffer: WebGLBuffer, size: number): void {
    const gl = this.gl;
    const loc = gl.getAttribLocation(program, name);
    if (loc < 0) return;
    gl.bindBuffer(gl.ARRAY_BUFFER, buffer);
    gl.enableVertexAttribArray(loc);
    gl.vertexAttribPointer(loc, size, gl.FLOAT, false, 0, 0);
  }
}
