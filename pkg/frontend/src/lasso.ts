/**
 * Lasso gesture: accumulates pointer positions into a world-space polygon
 * while the drag is active.  Committing with fewer than 3 vertices discards
 * the gesture; otherwise the polygon goes to the server's selection
 * endpoint and the returned pmids REPLACE the current selection — an empty
 * polygon result clears it.
 */

import type { ViewState } from './types.js';
import type { ApiClient } from './api.js';

export class LassoGesture {
  private vertices: [number, number][] = [];
  private active = false;

  /** Screen-space distance below which a new sample is dropped (px). */
  constructor(private readonly minSamplePx = 2) {}

  get isActive(): boolean {
    return this.active;
  }

  /** Current polygon-in-progress (world coordinates). */
  get polygon(): [number, number][] {
    return this.vertices.slice();
  }

  begin(wx: number, wy: number): void {
    this.active = true;
    this.vertices = [[wx, wy]];
  }

  /**
   * Add a sample; `screenStepPx` is the pointer's screen-space distance from
   * the previous sample, used to thin near-duplicate move events.
   */
  extend(wx: number, wy: number, screenStepPx: number = Infinity): void {
    if (!this.active) return;
    if (screenStepPx < this.minSamplePx) return;
    this.vertices.push([wx, wy]);
  }

  /**
   * End the gesture.  Returns the polygon when it has at least 3 vertices,
   * or null when the gesture was too small to mean anything and is discarded.
   */
  commit(): [number, number][] | null {
    this.active = false;
    const polygon = this.vertices;
    this.vertices = [];
    if (polygon.length < 3) {
      return null;
    }
    return polygon;
  }

  cancel(): void {
    this.active = false;
    this.vertices = [];
  }
}

/**
 * Commit a lasso polygon: ask the server which points fall inside and
 * replace the selection with the answer.  Returns the new selection, or
 * null when the polygon was discarded (selection untouched).
 */
export async function commitLasso(
  api: ApiClient,
  datasetId: string,
  view: ViewState,
  gesture: LassoGesture,
): Promise<string[] | null> {
  const polygon = gesture.commit();
  if (polygon === null) {
    view.pendingPolygon = [];
    return null;
  }
  view.pendingPolygon = polygon;
  const result = await api.selectPolygon(datasetId, polygon);
  view.selected = result.pmids;
  view.pendingPolygon = [];
  return result.pmids;
}
