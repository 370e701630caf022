/**
 * Bucket PR quadtree over the 2D article coordinates, used for hover picking
 * and lasso selection on the client.  This mirrors the server's spatial index
 * operation for operation — same bounds padding, same child ordering, same
 * tie-breaking — so a pick computed here matches what the server would
 * return for the same cursor, which the test suite checks against recorded
 * server answers.
 *
 * Boundary rules:
 *  - circle and radius queries are inclusive (distance <= radius);
 *  - nearest-in-radius breaks exact distance ties toward the smaller pmid
 *    (plain string comparison);
 *  - polygon containment is even-odd, and points exactly on an edge count
 *    as inside.
 */

export type PointRecord = { pmid: string; x: number; y: number };

export type QueryStats = { distanceEvals: number; nodesVisited: number };

export class QuadtreeBuildError extends Error {}

class Node {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  points: PointRecord[] | null;
  children: Node[] | null;

  constructor(x0: number, y0: number, x1: number, y1: number) {
    this.x0 = x0;
    this.y0 = y0;
    this.x1 = x1;
    this.y1 = y1;
    this.points = [];
    this.children = null; // [sw, se, nw, ne]
  }

  childFor(x: number, y: number): Node {
    const cx = (this.x0 + this.x1) / 2.0;
    const cy = (this.y0 + this.y1) / 2.0;
    const i = (y >= cy ? 2 : 0) + (x >= cx ? 1 : 0);
    return (this.children as Node[])[i];
  }

  split(): void {
    const cx = (this.x0 + this.x1) / 2.0;
    const cy = (this.y0 + this.y1) / 2.0;
    this.children = [
      new Node(this.x0, this.y0, cx, cy),
      new Node(cx, this.y0, this.x1, cy),
      new Node(this.x0, cy, cx, this.y1),
      new Node(cx, cy, this.x1, this.y1),
    ];
    const pts = this.points as PointRecord[];
    this.points = null;
    for (const p of pts) {
      (this.childFor(p.x, p.y).points as PointRecord[]).push(p);
    }
  }
}

/** Even-odd containment; points exactly on an edge count as inside. */
export function pointInPolygon(x: number, y: number, vertices: [number, number][]): boolean {
  const n = vertices.length;
  let inside = false;
  let j = n - 1;
  for (let i = 0; i < n; i++) {
    const [xi, yi] = vertices[i];
    const [xj, yj] = vertices[j];
    if (onSegment(x, y, xi, yi, xj, yj)) {
      return true;
    }
    if (yi > y !== yj > y) {
      const xCross = ((xj - xi) * (y - yi)) / (yj - yi) + xi;
      if (x < xCross) {
        inside = !inside;
      }
    }
    j = i;
  }
  return inside;
}

function onSegment(px: number, py: number, ax: number, ay: number, bx: number, by: number): boolean {
  const cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
  if (cross !== 0.0) {
    return false;
  }
  return (
    Math.min(ax, bx) <= px &&
    px <= Math.max(ax, bx) &&
    Math.min(ay, by) <= py &&
    py <= Math.max(ay, by)
  );
}

function orient(ax: number, ay: number, bx: number, by: number, cx: number, cy: number): number {
  return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

function segmentsIntersect(
  ax: number,
  ay: number,
  bx: number,
  by: number,
  cx: number,
  cy: number,
  dx: number,
  dy: number,
): boolean {
  // Inclusive: touching endpoints and collinear overlap count as intersecting.
  const d1 = orient(cx, cy, dx, dy, ax, ay);
  const d2 = orient(cx, cy, dx, dy, bx, by);
  const d3 = orient(ax, ay, bx, by, cx, cy);
  const d4 = orient(ax, ay, bx, by, dx, dy);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  if (d1 === 0 && onSegment(ax, ay, cx, cy, dx, dy)) return true;
  if (d2 === 0 && onSegment(bx, by, cx, cy, dx, dy)) return true;
  if (d3 === 0 && onSegment(cx, cy, ax, ay, bx, by)) return true;
  if (d4 === 0 && onSegment(dx, dy, ax, ay, bx, by)) return true;
  return false;
}

/**
 * Bucketed point-region quadtree; leaves hold up to `capacity` points.
 * Leaves at `maxDepth` may exceed capacity (overflow buckets), which keeps
 * duplicate coordinates from splitting forever.
 */
export class Quadtree {
  readonly capacity: number;
  readonly maxDepth: number;
  readonly n: number;
  readonly bounds: [number, number, number, number];
  private root: Node;

  constructor(points: PointRecord[], capacity = 16, maxDepth = 24) {
    if (capacity < 1) throw new QuadtreeBuildError('capacity must be >= 1');
    if (maxDepth < 1) throw new QuadtreeBuildError('maxDepth must be >= 1');
    for (const p of points) {
      if (!Number.isFinite(p.x) || !Number.isFinite(p.y)) {
        throw new QuadtreeBuildError(`non-finite coordinate for pmid ${p.pmid}`);
      }
    }
    this.capacity = capacity;
    this.maxDepth = maxDepth;
    this.n = points.length;
    let x0: number, y0: number, x1: number, y1: number;
    if (points.length > 0) {
      x0 = Infinity;
      y0 = Infinity;
      x1 = -Infinity;
      y1 = -Infinity;
      for (const p of points) {
        if (p.x < x0) x0 = p.x;
        if (p.x > x1) x1 = p.x;
        if (p.y < y0) y0 = p.y;
        if (p.y > y1) y1 = p.y;
      }
    } else {
      x0 = 0.0;
      y0 = 0.0;
      x1 = 1.0;
      y1 = 1.0;
    }
    const margin = 1e-6 * Math.max(x1 - x0, y1 - y0, 1.0);
    this.bounds = [x0 - margin, y0 - margin, x1 + margin, y1 + margin];
    this.root = new Node(this.bounds[0], this.bounds[1], this.bounds[2], this.bounds[3]);
    for (const p of points) {
      this.insert(p);
    }
  }

  private insert(p: PointRecord): void {
    if (
      !(
        this.bounds[0] <= p.x &&
        p.x <= this.bounds[2] &&
        this.bounds[1] <= p.y &&
        p.y <= this.bounds[3]
      )
    ) {
      throw new QuadtreeBuildError(`point ${p.pmid} outside tree bounds`);
    }
    let node = this.root;
    let depth = 0;
    for (;;) {
      if (node.points !== null) {
        if (node.points.length < this.capacity || depth >= this.maxDepth) {
          node.points.push(p);
          return;
        }
        node.split();
      }
      node = node.childFor(p.x, p.y);
      depth += 1;
    }
  }

  /** All pmids with Euclidean distance <= radius from (cx, cy). */
  queryCircle(cx: number, cy: number, radius: number, stats?: QueryStats): Set<string> {
    if (radius < 0) throw new RangeError('radius must be >= 0');
    const r2 = radius * radius;
    const found = new Set<string>();
    const stack: Node[] = [this.root];
    while (stack.length > 0) {
      const node = stack.pop() as Node;
      if (stats) stats.nodesVisited += 1;
      // Prune nodes whose rectangle cannot intersect the circle.
      const nx = Math.min(Math.max(cx, node.x0), node.x1);
      const ny = Math.min(Math.max(cy, node.y0), node.y1);
      if ((nx - cx) * (nx - cx) + (ny - cy) * (ny - cy) > r2) {
        continue;
      }
      if (node.points !== null) {
        for (const p of node.points) {
          if (stats) stats.distanceEvals += 1;
          if ((p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy) <= r2) {
            found.add(p.pmid);
          }
        }
      } else {
        for (const c of node.children as Node[]) stack.push(c);
      }
    }
    return found;
  }

  /** Closest point within radius of the cursor; ties go to the smaller pmid. */
  nearestInRadius(
    cx: number,
    cy: number,
    radius: number,
    stats?: QueryStats,
  ): { pmid: string; distance: number } | null {
    if (radius <= 0) throw new RangeError('radius must be > 0');
    const r2 = radius * radius;
    let bestD2 = Infinity;
    let bestPmid: string | null = null;
    const stack: Node[] = [this.root];
    while (stack.length > 0) {
      const node = stack.pop() as Node;
      if (stats) stats.nodesVisited += 1;
      const nx = Math.min(Math.max(cx, node.x0), node.x1);
      const ny = Math.min(Math.max(cy, node.y0), node.y1);
      const d2Node = (nx - cx) * (nx - cx) + (ny - cy) * (ny - cy);
      if (d2Node > r2 || (bestPmid !== null && d2Node > bestD2)) {
        continue;
      }
      if (node.points !== null) {
        for (const p of node.points) {
          if (stats) stats.distanceEvals += 1;
          const d2 = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy);
          if (d2 <= r2 && (bestPmid === null || d2 < bestD2 || (d2 === bestD2 && p.pmid < bestPmid))) {
            bestD2 = d2;
            bestPmid = p.pmid;
          }
        }
      } else {
        for (const c of node.children as Node[]) stack.push(c);
      }
    }
    if (bestPmid === null) return null;
    return { pmid: bestPmid, distance: Math.sqrt(bestD2) };
  }

  /** Pmids inside a closed polygon (even-odd rule, boundary inclusive). */
  queryPolygon(vertices: [number, number][], stats?: QueryStats): Set<string> {
    if (vertices.length < 3) throw new RangeError('polygon needs at least 3 vertices');
    let px0 = Infinity;
    let py0 = Infinity;
    let px1 = -Infinity;
    let py1 = -Infinity;
    for (const [vx, vy] of vertices) {
      if (vx < px0) px0 = vx;
      if (vx > px1) px1 = vx;
      if (vy < py0) py0 = vy;
      if (vy > py1) py1 = vy;
    }
    const found = new Set<string>();
    const stack: Node[] = [this.root];
    while (stack.length > 0) {
      const node = stack.pop() as Node;
      if (stats) stats.nodesVisited += 1;
      if (node.x1 < px0 || node.x0 > px1 || node.y1 < py0 || node.y0 > py1) {
        continue;
      }
      if (!rectTouchedByEdges(node, vertices)) {
        // No polygon edge crosses this rectangle, so it is uniformly inside
        // or outside; one containment test decides the whole node.
        const cx = (node.x0 + node.x1) / 2.0;
        const cy = (node.y0 + node.y1) / 2.0;
        if (pointInPolygon(cx, cy, vertices)) {
          collect(node, found);
        }
        continue;
      }
      if (node.points !== null) {
        for (const p of node.points) {
          if (pointInPolygon(p.x, p.y, vertices)) {
            found.add(p.pmid);
          }
        }
      } else {
        for (const c of node.children as Node[]) stack.push(c);
      }
    }
    return found;
  }
}

function rectTouchedByEdges(
  node: { x0: number; y0: number; x1: number; y1: number },
  vertices: [number, number][],
): boolean {
  const { x0, y0, x1, y1 } = node;
  const n = vertices.length;
  let j = n - 1;
  for (let i = 0; i < n; i++) {
    const [ax, ay] = vertices[j];
    const [bx, by] = vertices[i];
    j = i;
    if (x0 <= ax && ax <= x1 && y0 <= ay && ay <= y1) return true;
    if (x0 <= bx && bx <= x1 && y0 <= by && by <= y1) return true;
    if (Math.max(ax, bx) < x0 || Math.min(ax, bx) > x1 || Math.max(ay, by) < y0 || Math.min(ay, by) > y1) {
      continue;
    }
    if (
      segmentsIntersect(ax, ay, bx, by, x0, y0, x1, y0) ||
      segmentsIntersect(ax, ay, bx, by, x1, y0, x1, y1) ||
      segmentsIntersect(ax, ay, bx, by, x1, y1, x0, y1) ||
      segmentsIntersect(ax, ay, bx, by, x0, y1, x0, y0)
    ) {
      return true;
    }
  }
  return false;
}

function collect(node: Node, found: Set<string>): void {
  const stack: Node[] = [node];
  while (stack.length > 0) {
    const cur = stack.pop() as Node;
    if (cur.points !== null) {
      for (const p of cur.points) found.add(p.pmid);
    } else {
      for (const c of cur.children as Node[]) stack.push(c);
    }
  }
}
