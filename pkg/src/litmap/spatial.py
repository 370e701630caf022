"""Bucket PR quadtree over 2D article coordinates.

Powers hover picking (nearest within a radius), circular range queries, and
freeform polygon selection.  The tree is built once from the map coordinates
and is immutable afterwards, so any number of readers can query concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

Point = tuple[str, float, float]  # (pmid, x, y)


class BuildError(Exception):
    pass


@dataclass
class QueryStats:
    """Optional instrumentation for query cost (distance evals, node visits)."""

    distance_evals: int = 0
    nodes_visited: int = 0


class _Node:
    __slots__ = ("x0", "y0", "x1", "y1", "points", "children")

    def __init__(self, x0: float, y0: float, x1: float, y1: float):
        self.x0 = x0
        self.y0 = y0
        self.x1 = x1
        self.y1 = y1
        self.points: list[Point] | None = []
        self.children: list[_Node] | None = None  # [sw, se, nw, ne]

    def child_for(self, x: float, y: float) -> "_Node":
        cx = (self.x0 + self.x1) / 2.0
        cy = (self.y0 + self.y1) / 2.0
        i = (2 if y >= cy else 0) + (1 if x >= cx else 0)
        return self.children[i]

    def split(self) -> None:
        cx = (self.x0 + self.x1) / 2.0
        cy = (self.y0 + self.y1) / 2.0
        self.children = [
            _Node(self.x0, self.y0, cx, cy),
            _Node(cx, self.y0, self.x1, cy),
            _Node(self.x0, cy, cx, self.y1),
            _Node(cx, cy, self.x1, self.y1),
        ]
        pts = self.points
        self.points = None
        for p in pts:
            self.child_for(p[1], p[2]).points.append(p)


def point_in_polygon(x: float, y: float, vertices: list[tuple[float, float]]) -> bool:
    """Even-odd containment; points exactly on an edge count as inside."""
    n = len(vertices)
    inside = False
    j = n - 1
    for i in range(n):
        xi, yi = vertices[i]
        xj, yj = vertices[j]
        if _on_segment(x, y, xi, yi, xj, yj):
            return True
        if (yi > y) != (yj > y):
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def _on_segment(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> bool:
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    if cross != 0.0:
        return False
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segments_intersect(ax, ay, bx, by, cx, cy, dx, dy) -> bool:
    # Inclusive: touching endpoints and collinear overlap count as intersecting.
    d1 = _orient(cx, cy, dx, dy, ax, ay)
    d2 = _orient(cx, cy, dx, dy, bx, by)
    d3 = _orient(ax, ay, bx, by, cx, cy)
    d4 = _orient(ax, ay, bx, by, dx, dy)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == 0 and _on_segment(ax, ay, cx, cy, dx, dy):
        return True
    if d2 == 0 and _on_segment(bx, by, cx, cy, dx, dy):
        return True
    if d3 == 0 and _on_segment(cx, cy, ax, ay, bx, by):
        return True
    if d4 == 0 and _on_segment(dx, dy, ax, ay, bx, by):
        return True
    return False


class Quadtree:
    """Bucketed point-region quadtree; leaves hold up to ``capacity`` points.

    Leaves at ``max_depth`` may exceed capacity (overflow buckets), which keeps
    duplicate coordinates from splitting forever.
    """

    def __init__(self, points: list[Point], capacity: int = 16, max_depth: int = 24):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        for pmid, x, y in points:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise BuildError(f"non-finite coordinate for pmid {pmid!r}")
        self.capacity = capacity
        self.max_depth = max_depth
        self.n = len(points)
        if points:
            xs = [p[1] for p in points]
            ys = [p[2] for p in points]
            x0, x1 = min(xs), max(xs)
            y0, y1 = min(ys), max(ys)
        else:
            x0, y0, x1, y1 = 0.0, 0.0, 1.0, 1.0
        margin = 1e-6 * max(x1 - x0, y1 - y0, 1.0)
        self.bounds = (x0 - margin, y0 - margin, x1 + margin, y1 + margin)
        self._root = _Node(*self.bounds)
        for p in points:
            self._insert(p)

    def _insert(self, p: Point) -> None:
        pmid, x, y = p
        if not (self.bounds[0] <= x <= self.bounds[2] and self.bounds[1] <= y <= self.bounds[3]):
            raise BuildError(f"point {pmid!r} outside tree bounds")
        node = self._root
        depth = 0
        while True:
            if node.points is not None:
                if len(node.points) < self.capacity or depth >= self.max_depth:
                    node.points.append(p)
                    return
                node.split()
            node = node.child_for(x, y)
            depth += 1

    # -- queries ----------------------------------------------------------

    def query_circle(
        self, center: tuple[float, float], radius: float, stats: QueryStats | None = None
    ) -> set[str]:
        """All pmids with Euclidean distance <= radius from center."""
        if radius < 0:
            raise ValueError("radius must be >= 0")
        cx, cy = center
        r2 = radius * radius
        found: set[str] = set()
        stack = [self._root]
        while stack:
            node = stack.pop()
            if stats is not None:
                stats.nodes_visited += 1
            # Prune nodes whose rectangle cannot intersect the circle.
            nx = min(max(cx, node.x0), node.x1)
            ny = min(max(cy, node.y0), node.y1)
            if (nx - cx) ** 2 + (ny - cy) ** 2 > r2:
                continue
            if node.points is not None:
                for pmid, x, y in node.points:
                    if stats is not None:
                        stats.distance_evals += 1
                    if (x - cx) ** 2 + (y - cy) ** 2 <= r2:
                        found.add(pmid)
            else:
                stack.extend(node.children)
        return found

    def nearest_in_radius(
        self,
        cursor: tuple[float, float],
        radius: float,
        stats: QueryStats | None = None,
    ) -> tuple[str, float] | None:
        """Closest point within radius of the cursor; ties go to the smaller pmid."""
        if radius <= 0:
            raise ValueError("radius must be > 0")
        cx, cy = cursor
        r2 = radius * radius
        best: tuple[float, str] | None = None
        stack = [self._root]
        while stack:
            node = stack.pop()
            if stats is not None:
                stats.nodes_visited += 1
            nx = min(max(cx, node.x0), node.x1)
            ny = min(max(cy, node.y0), node.y1)
            d2_node = (nx - cx) ** 2 + (ny - cy) ** 2
            if d2_node > r2 or (best is not None and d2_node > best[0]):
                continue
            if node.points is not None:
                for pmid, x, y in node.points:
                    if stats is not None:
                        stats.distance_evals += 1
                    d2 = (x - cx) ** 2 + (y - cy) ** 2
                    if d2 <= r2 and (best is None or (d2, pmid) < best):
                        best = (d2, pmid)
            else:
                stack.extend(node.children)
        if best is None:
            return None
        return best[1], math.sqrt(best[0])

    def query_polygon(
        self, vertices: list[tuple[float, float]], stats: QueryStats | None = None
    ) -> set[str]:
        """Points inside a closed polygon (even-odd rule, boundary inclusive)."""
        if len(vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        px0 = min(v[0] for v in vertices)
        py0 = min(v[1] for v in vertices)
        px1 = max(v[0] for v in vertices)
        py1 = max(v[1] for v in vertices)
        found: set[str] = set()
        stack = [self._root]
        while stack:
            node = stack.pop()
            if stats is not None:
                stats.nodes_visited += 1
            if node.x1 < px0 or node.x0 > px1 or node.y1 < py0 or node.y0 > py1:
                continue
            if not self._rect_touched_by_edges(node, vertices):
                # No polygon edge crosses this rectangle, so it is uniformly
                # inside or outside; one containment test decides the node.
                cx = (node.x0 + node.x1) / 2.0
                cy = (node.y0 + node.y1) / 2.0
                if point_in_polygon(cx, cy, vertices):
                    self._collect(node, found)
                continue
            if node.points is not None:
                for pmid, x, y in node.points:
                    if point_in_polygon(x, y, vertices):
                        found.add(pmid)
            else:
                stack.extend(node.children)
        return found

    @staticmethod
    def _rect_touched_by_edges(node: _Node, vertices: list[tuple[float, float]]) -> bool:
        x0, y0, x1, y1 = node.x0, node.y0, node.x1, node.y1
        n = len(vertices)
        j = n - 1
        for i in range(n):
            ax, ay = vertices[j]
            bx, by = vertices[i]
            j = i
            if x0 <= ax <= x1 and y0 <= ay <= y1:
                return True
            if x0 <= bx <= x1 and y0 <= by <= y1:
                return True
            if max(ax, bx) < x0 or min(ax, bx) > x1 or max(ay, by) < y0 or min(ay, by) > y1:
                continue
            if (
                _segments_intersect(ax, ay, bx, by, x0, y0, x1, y0)
                or _segments_intersect(ax, ay, bx, by, x1, y0, x1, y1)
                or _segments_intersect(ax, ay, bx, by, x1, y1, x0, y1)
                or _segments_intersect(ax, ay, bx, by, x0, y1, x0, y0)
            ):
                return True
        return False

    @staticmethod
    def _collect(node: _Node, found: set[str]) -> None:
        stack = [node]
        while stack:
            cur = stack.pop()
            if cur.points is not None:
                for pmid, _, _ in cur.points:
                    found.add(pmid)
            else:
                stack.extend(cur.children)

    # -- introspection ----------------------------------------------------

    def depth(self) -> int:
        best = 0
        stack = [(self._root, 0)]
        while stack:
            node, d = stack.pop()
            if node.points is not None:
                best = max(best, d)
            else:
                stack.extend((c, d + 1) for c in node.children)
        return best

    def leaf_sizes(self) -> list[int]:
        sizes = []
        stack = [self._root]
        while stack:
            node = stack.pop()
            if node.points is not None:
                sizes.append(len(node.points))
            else:
                stack.extend(node.children)
        return sizes


def build(points: list[Point], capacity: int = 16, max_depth: int = 24) -> Quadtree:
    """Build an immutable quadtree over (pmid, x, y) records."""
    return Quadtree(points, capacity=capacity, max_depth=max_depth)
