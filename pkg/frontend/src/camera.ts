/**
 * Screen/world coordinate mapping.  The camera stores a world-space center
 * and a zoom in pixels per world unit; screen coordinates are CSS pixels
 * with the origin at the top-left of the canvas.  Screen y and world y point
 * the same way here — the renderer owns any orientation flip — so the
 * mapping stays a single affine transform and its inverse.
 */

import type { Camera } from './types.js';

export type Viewport = { width: number; height: number };

export function worldToScreen(camera: Camera, wx: number, wy: number, viewport: Viewport): [number, number] {
  const sx = (wx - camera.x) * camera.zoom + viewport.width / 2;
  const sy = (wy - camera.y) * camera.zoom + viewport.height / 2;
  return [sx, sy];
}

export function screenToWorld(camera: Camera, sx: number, sy: number, viewport: Viewport): [number, number] {
  const wx = (sx - viewport.width / 2) / camera.zoom + camera.x;
  const wy = (sy - viewport.height / 2) / camera.zoom + camera.y;
  return [wx, wy];
}

/** Pan the camera by a screen-space delta (e.g. a pointer drag). */
export function panned(camera: Camera, dxPx: number, dyPx: number): Camera {
  return { x: camera.x - dxPx / camera.zoom, y: camera.y - dyPx / camera.zoom, zoom: camera.zoom };
}

/**
 * Zoom by `factor` about a fixed screen point, so the world position under
 * the cursor stays put.
 */
export function zoomedAbout(camera: Camera, factor: number, sx: number, sy: number, viewport: Viewport): Camera {
  if (!(factor > 0)) throw new RangeError('zoom factor must be > 0');
  const [wx, wy] = screenToWorld(camera, sx, sy, viewport);
  const zoom = camera.zoom * factor;
  // Solve (wx - x') * zoom + w/2 = sx for the new center x'.
  const x = wx - (sx - viewport.width / 2) / zoom;
  const y = wy - (sy - viewport.height / 2) / zoom;
  return { x, y, zoom };
}

/** Fit the camera to a world-space bounding box with a small margin. */
export function fitBounds(x0: number, y0: number, x1: number, y1: number, viewport: Viewport): Camera {
  const spanX = Math.max(x1 - x0, 1e-9);
  const spanY = Math.max(y1 - y0, 1e-9);
  const zoom = 0.9 * Math.min(viewport.width / spanX, viewport.height / spanY);
  return { x: (x0 + x1) / 2, y: (y0 + y1) / 2, zoom };
}
