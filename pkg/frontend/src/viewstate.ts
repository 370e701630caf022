/**
 * The client's view state: camera, year filter, highlighted clusters,
 * selection, pins, and any uncommitted lasso polygon.  The whole record is
 * serializable so a view can be stashed in a URL or restored across reloads;
 * encoding is canonical (fixed key order, no whitespace) so encoding the
 * decode of an encoded state reproduces the same bytes.
 */

import type { Camera, ViewState } from './types.js';

export class ViewStateError extends Error {}

export function createViewState(camera?: Partial<Camera>): ViewState {
  return {
    camera: { x: camera?.x ?? 0, y: camera?.y ?? 0, zoom: camera?.zoom ?? 1 },
    yearRange: null,
    highlighted: [],
    selected: [],
    pinned: [],
    pendingPolygon: [],
  };
}

/**
 * Enforce the state invariants: zoom positive and finite, year range ordered
 * integers, and (when the dataset's cluster ids are known) every highlighted
 * id present in the dataset.
 */
export function validateViewState(state: ViewState, knownClusterIds?: Iterable<number>): void {
  const { camera, yearRange, highlighted } = state;
  if (!Number.isFinite(camera.x) || !Number.isFinite(camera.y)) {
    throw new ViewStateError('camera center must be finite');
  }
  if (!Number.isFinite(camera.zoom) || !(camera.zoom > 0)) {
    throw new ViewStateError(`camera zoom must be > 0, got ${camera.zoom}`);
  }
  if (yearRange !== null) {
    const [lo, hi] = yearRange;
    if (!Number.isInteger(lo) || !Number.isInteger(hi)) {
      throw new ViewStateError('year range must be a pair of integers');
    }
    if (lo > hi) {
      throw new ViewStateError(`year range min ${lo} exceeds max ${hi}`);
    }
  }
  if (knownClusterIds !== undefined) {
    const known = new Set(knownClusterIds);
    for (const cid of highlighted) {
      if (!known.has(cid)) {
        throw new ViewStateError(`highlighted cluster ${cid} does not exist in the dataset`);
      }
    }
  }
}

/** Canonical JSON encoding: fixed key order, no whitespace. */
export function encodeViewState(state: ViewState): string {
  // Rebuild the object literal so key order never depends on how the caller
  // constructed or mutated the state.
  const canonical = {
    camera: { x: state.camera.x, y: state.camera.y, zoom: state.camera.zoom },
    yearRange: state.yearRange === null ? null : [state.yearRange[0], state.yearRange[1]],
    highlighted: state.highlighted,
    selected: state.selected,
    pinned: state.pinned,
    pendingPolygon: state.pendingPolygon.map(([x, y]) => [x, y]),
  };
  return JSON.stringify(canonical);
}

export function decodeViewState(encoded: string): ViewState {
  let raw: unknown;
  try {
    raw = JSON.parse(encoded);
  } catch (err) {
    throw new ViewStateError(`view state is not valid JSON: ${(err as Error).message}`);
  }
  if (typeof raw !== 'object' || raw === null) {
    throw new ViewStateError('view state must be a JSON object');
  }
  const obj = raw as Record<string, unknown>;
  const camera = obj.camera as Record<string, unknown> | undefined;
  if (
    camera === undefined ||
    typeof camera.x !== 'number' ||
    typeof camera.y !== 'number' ||
    typeof camera.zoom !== 'number'
  ) {
    throw new ViewStateError('view state camera must have numeric x, y, zoom');
  }
  const yearRange = obj.yearRange ?? null;
  if (yearRange !== null && !(Array.isArray(yearRange) && yearRange.length === 2)) {
    throw new ViewStateError('yearRange must be null or a [min, max] pair');
  }
  const state: ViewState = {
    camera: { x: camera.x, y: camera.y, zoom: camera.zoom },
    yearRange: yearRange === null ? null : [Number(yearRange[0]), Number(yearRange[1])],
    highlighted: asArray(obj.highlighted, 'highlighted').map(Number),
    selected: asArray(obj.selected, 'selected').map(String),
    pinned: asArray(obj.pinned, 'pinned').map(String),
    pendingPolygon: asArray(obj.pendingPolygon, 'pendingPolygon').map((v) => {
      if (!Array.isArray(v) || v.length !== 2) {
        throw new ViewStateError('pendingPolygon entries must be [x, y] pairs');
      }
      return [Number(v[0]), Number(v[1])] as [number, number];
    }),
  };
  validateViewState(state);
  return state;
}

function asArray(value: unknown, field: string): unknown[] {
  if (value === undefined) return [];
  if (!Array.isArray(value)) {
    throw new ViewStateError(`${field} must be an array`);
  }
  return value;
}
