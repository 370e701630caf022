/**
 * Hover picking: map the cursor to world space and ask the point index for
 * the nearest article within a fixed screen-space radius.  Picking runs on
 * the client's quadtree, never by reading pixels back from the GPU, so it
 * works identically with rendering disabled and matches the server's answer
 * for the same cursor.
 */

import type { Camera } from './types.js';
import type { Viewport } from './camera.js';
import { screenToWorld } from './camera.js';
import type { Quadtree } from './quadtree.js';

/** Pick radius around the cursor, in CSS pixels. */
export const HOVER_RADIUS_PX = 12;

export type HoverHit = { pmid: string; worldDistance: number };

/**
 * Nearest article within HOVER_RADIUS_PX of the cursor, or null when the
 * cursor is over empty space.  Exact-distance ties resolve to the smaller
 * pmid, matching the index's tie rule.
 */
export function hoverPick(
  tree: Quadtree,
  camera: Camera,
  sx: number,
  sy: number,
  viewport: Viewport,
  radiusPx: number = HOVER_RADIUS_PX,
): HoverHit | null {
  const [wx, wy] = screenToWorld(camera, sx, sy, viewport);
  const radiusWorld = radiusPx / camera.zoom;
  const hit = tree.nearestInRadius(wx, wy, radiusWorld);
  if (hit === null) return null;
  return { pmid: hit.pmid, worldDistance: hit.distance };
}
