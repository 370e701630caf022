"""Kernel-density edge bundling of citation links.

Edges are resampled into short segments, interior sample points are splatted
onto an R x R density grid with a truncated Gaussian stamp, and every
interior point then advects up the density gradient, is smoothed with one
Laplacian pass, and the bandwidth shrinks — repeated for a fixed number of
iterations.  Endpoints never move.  The loop runs in grid coordinates; the
final polylines are simplified (Douglas-Peucker) and mapped back to map
units with the endpoints pinned bit-exactly to the article coordinates.

Density accumulation happens in one canonical edge order (sorted by source
then target pmid), so permuting the input edge list cannot change any
output polyline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit


class BundlingError(Exception):
    pass


@dataclass(frozen=True)
class RawEdge:
    source: str
    target: str
    weight: float = 1.0


@dataclass
class BundledEdge:
    source: str
    target: str
    weight: float
    points: np.ndarray  # (m, 2) world coordinates, m >= 2

    def to_jsonable(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "weight": self.weight,
            "points": [[float(x), float(y)] for x, y in self.points],
        }


@dataclass
class DensityGrid:
    values: np.ndarray  # (R, R), row = y cell, col = x cell
    cell_size: float
    bandwidth: float  # current h, in cells


@dataclass
class BundleConfig:
    grid_size: int = 256
    h0_frac: float = 0.05  # initial bandwidth as a fraction of the bbox diagonal
    decay: float = 0.9
    iterations: int = 10
    step: float = 0.3  # advection step multiplier (eta)
    smoothing: float = 0.5  # Laplacian blend (lambda)
    max_segment_frac: float = 0.02  # resampling length as a fraction of the diagonal
    min_bandwidth: float = 0.5  # cells; splatting needs h >= 0.5
    # Advection steps are eta*h*g/(|g| + reg) with reg = gradient_reg times
    # the mean gradient magnitude over all stations.  High values mean only
    # gradients that stand well above the field's typical level move points,
    # so incoherent tangles stay nearly straight (and simplify away) while
    # strongly co-aligned edges still attract each other.
    gradient_reg: float = 80.0

    def validate(self) -> None:
        if self.grid_size < 8:
            raise BundlingError("grid_size must be >= 8")
        if not (0.0 < self.decay <= 1.0):
            raise BundlingError("decay must be in (0, 1]")
        if self.iterations < 1:
            raise BundlingError("iterations must be >= 1")
        for name in ("h0_frac", "step", "smoothing", "max_segment_frac"):
            if getattr(self, name) <= 0:
                raise BundlingError(f"{name} must be positive")
        if self.gradient_reg < 0:
            raise BundlingError("gradient_reg must be >= 0")


def resample_polyline(
    points: np.ndarray, max_segment_length: float
) -> tuple[np.ndarray, bool]:
    """Subdivide segments so none exceeds max_segment_length.

    Each segment of length L becomes ceil(L / max_segment_length) equal
    pieces by linear interpolation; original vertices are preserved exactly.
    A zero-length polyline cannot be subdivided and comes back unchanged
    with the degenerate flag set.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise BundlingError("polyline needs at least 2 points of dimension 2")
    if max_segment_length <= 0:
        raise BundlingError("max_segment_length must be positive")
    seg_lens = np.sqrt(np.sum(np.diff(pts, axis=0) ** 2, axis=1))
    if float(seg_lens.sum()) == 0.0:
        return pts, True
    out = [pts[0]]
    for i in range(pts.shape[0] - 1):
        pieces = max(1, int(math.ceil(seg_lens[i] / max_segment_length)))
        for p in range(1, pieces):
            t = p / pieces
            out.append(pts[i] * (1.0 - t) + pts[i + 1] * t)
        out.append(pts[i + 1])
    return np.array(out), False


@njit(cache=False)
def _splat_points(density, rows, cols, weights, stamp, radius):
    size = density.shape[0]
    for p in range(rows.shape[0]):
        r0 = rows[p] - radius
        c0 = cols[p] - radius
        for dr in range(stamp.shape[0]):
            rr = r0 + dr
            if rr < 0 or rr >= size:
                continue
            for dc in range(stamp.shape[1]):
                cc = c0 + dc
                if cc < 0 or cc >= size:
                    continue
                density[rr, cc] += weights[p] * stamp[dr, dc]


@njit(cache=False)
def _cell_gradient(density, x, y):
    """Central-difference density gradient at the cell containing (x, y).

    Falls back to one-sided differences on the border rows/columns.
    """
    size = density.shape[0]
    c = int(math.floor(x + 0.5))
    r = int(math.floor(y + 0.5))
    if c < 0:
        c = 0
    elif c > size - 1:
        c = size - 1
    if r < 0:
        r = 0
    elif r > size - 1:
        r = size - 1
    if c == 0:
        gx = density[r, 1] - density[r, 0]
    elif c == size - 1:
        gx = density[r, size - 1] - density[r, size - 2]
    else:
        gx = 0.5 * (density[r, c + 1] - density[r, c - 1])
    if r == 0:
        gy = density[1, c] - density[0, c]
    elif r == size - 1:
        gy = density[size - 1, c] - density[size - 2, c]
    else:
        gy = 0.5 * (density[r + 1, c] - density[r - 1, c])
    return gx, gy


@njit(cache=False)
def _advect_points(xs, ys, offsets, density, eta, h, eps, reg_factor, lo_x, hi_x, lo_y, hi_y):
    # Regularize by a multiple of the mean gradient magnitude across the
    # stations being moved (plus the tiny floor ``eps``).  A near-zero
    # regularizer would turn the update into a constant eta*h step that hops
    # back and forth across density ridges forever, leaving cell-scale kinks
    # that defeat the final simplification; scaling by the typical gradient
    # makes the step proportional near ridge crests (stations settle) and
    # meaningful only where the pull stands out from the field's noise.
    total = 0.0
    count = 0
    for e in range(offsets.shape[0] - 1):
        for i in range(offsets[e] + 1, offsets[e + 1] - 1):
            gx, gy = _cell_gradient(density, xs[i], ys[i])
            total += math.sqrt(gx * gx + gy * gy)
            count += 1
    reg = eps
    if count > 0:
        reg = reg_factor * (total / count) + eps
    for e in range(offsets.shape[0] - 1):
        start = offsets[e]
        end = offsets[e + 1]
        for i in range(start + 1, end - 1):  # endpoints pinned
            gx, gy = _cell_gradient(density, xs[i], ys[i])
            norm = math.sqrt(gx * gx + gy * gy)
            scale = eta * h / (norm + reg)
            mx = scale * gx
            my = scale * gy
            mag = math.sqrt(mx * mx + my * my)
            if mag > 1.0:  # at most one cell per iteration
                mx /= mag
                my /= mag
            x = xs[i] + mx
            y = ys[i] + my
            if x < lo_x:
                x = lo_x
            elif x > hi_x:
                x = hi_x
            if y < lo_y:
                y = lo_y
            elif y > hi_y:
                y = hi_y
            xs[i] = x
            ys[i] = y


def _gaussian_stamp(h: float) -> tuple[np.ndarray, int]:
    """Truncated kernel: radius 3h cells, sigma = h, unnormalized."""
    radius = int(math.ceil(3.0 * h))
    coords = np.arange(-radius, radius + 1, dtype=np.float64)
    d2 = coords[:, None] ** 2 + coords[None, :] ** 2
    stamp = np.exp(-d2 / (2.0 * h * h))
    stamp[d2 > (3.0 * h) ** 2] = 0.0
    return stamp, radius


def splat_density(
    point_sets: list[np.ndarray],
    grid_size: int,
    bandwidth: float,
    weights: list[float] | None = None,
    cell_size: float = 1.0,
) -> DensityGrid:
    """Pure-sum KDE of the given grid-coordinate points.

    Each point adds the truncated Gaussian stamp centred on its nearest
    cell, scaled by the owning edge's weight.
    """
    if bandwidth < 0.5:
        raise BundlingError("bandwidth must be >= 0.5 cells")
    if weights is None:
        weights = [1.0] * len(point_sets)
    if len(weights) != len(point_sets):
        raise BundlingError("weights must match point_sets")
    density = np.zeros((grid_size, grid_size), dtype=np.float64)
    stamp, radius = _gaussian_stamp(bandwidth)
    all_rows: list[np.ndarray] = []
    all_cols: list[np.ndarray] = []
    all_w: list[np.ndarray] = []
    for pts, w in zip(point_sets, weights):
        pts = np.asarray(pts, dtype=np.float64)
        if pts.size == 0:
            continue
        cols = np.floor(pts[:, 0] + 0.5).astype(np.int64)
        rows = np.floor(pts[:, 1] + 0.5).astype(np.int64)
        all_rows.append(rows)
        all_cols.append(cols)
        all_w.append(np.full(pts.shape[0], float(w)))
    if all_rows:
        _splat_points(
            density,
            np.concatenate(all_rows),
            np.concatenate(all_cols),
            np.concatenate(all_w),
            stamp,
            radius,
        )
    return DensityGrid(values=density, cell_size=cell_size, bandwidth=bandwidth)


def _perpendicular_distances(pts: np.ndarray, i0: int, i1: int) -> np.ndarray:
    a = pts[i0]
    b = pts[i1]
    chord = b - a
    length = math.hypot(chord[0], chord[1])
    rel = pts[i0 + 1 : i1] - a
    if length == 0.0:
        return np.sqrt(np.sum(rel * rel, axis=1))
    return np.abs(rel[:, 0] * chord[1] - rel[:, 1] * chord[0]) / length


def douglas_peucker(points: np.ndarray, tolerance: float) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n <= 2:
        return pts.copy()
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        i0, i1 = stack.pop()
        if i1 <= i0 + 1:
            continue
        dists = _perpendicular_distances(pts, i0, i1)
        imax = int(np.argmax(dists))
        if dists[imax] > tolerance:
            mid = i0 + 1 + imax
            keep[mid] = True
            stack.append((i0, mid))
            stack.append((mid, i1))
    return pts[keep]


@dataclass
class _GridFrame:
    x0: float
    y0: float
    cell: float
    hi_gx: float
    hi_gy: float

    def to_grid(self, xy: np.ndarray) -> np.ndarray:
        out = np.empty_like(xy, dtype=np.float64)
        out[:, 0] = (xy[:, 0] - self.x0) / self.cell
        out[:, 1] = (xy[:, 1] - self.y0) / self.cell
        return out

    def to_world(self, g: np.ndarray) -> np.ndarray:
        out = np.empty_like(g, dtype=np.float64)
        out[:, 0] = self.x0 + g[:, 0] * self.cell
        out[:, 1] = self.y0 + g[:, 1] * self.cell
        return out


def _frame_for(coords: dict[str, tuple[float, float]], config: BundleConfig) -> tuple[_GridFrame, float, float]:
    xs = np.array([c[0] for c in coords.values()])
    ys = np.array([c[1] for c in coords.values()])
    xmin, xmax = float(xs.min()), float(xs.max())
    ymin, ymax = float(ys.min()), float(ys.max())
    width = xmax - xmin
    height = ymax - ymin
    diag = math.hypot(width, height)
    if diag == 0.0:
        diag = 1.0
    h0_world = config.h0_frac * diag
    pad = 3.0 * h0_world
    x0 = xmin - pad
    y0 = ymin - pad
    span = max(width, height) + 2.0 * pad
    cell = span / (config.grid_size - 1)
    h0_cells = h0_world / cell
    frame = _GridFrame(
        x0=x0,
        y0=y0,
        cell=cell,
        hi_gx=(xmax + pad - x0) / cell,
        hi_gy=(ymax + pad - y0) / cell,
    )
    max_seg_cells = config.max_segment_frac * diag / cell
    return frame, max(h0_cells, config.min_bandwidth), max_seg_cells


def bundle_edges(
    raw: list[RawEdge],
    coords: dict[str, tuple[float, float]],
    config: BundleConfig | None = None,
) -> list[BundledEdge]:
    """Bundle the edge set over the article coordinate field.

    Returns one polyline per input edge in canonical (source, target) order,
    endpoints bit-identical to the article coordinates.
    """
    config = config or BundleConfig()
    config.validate()
    if not coords:
        raise BundlingError("coords must be non-empty")
    for e in raw:
        if e.source == e.target:
            raise BundlingError(f"self-loop on {e.source}")
        if e.source not in coords or e.target not in coords:
            missing = e.source if e.source not in coords else e.target
            raise BundlingError(f"edge endpoint {missing} not in dataset")
        if e.weight <= 0:
            raise BundlingError(f"edge {e.source}->{e.target} has non-positive weight")

    order = sorted(range(len(raw)), key=lambda i: (raw[i].source, raw[i].target, raw[i].weight))
    edges = [raw[i] for i in order]
    frame, h0_cells, max_seg_cells = _frame_for(coords, config)

    polylines: list[np.ndarray] = []
    degenerate: list[bool] = []
    for e in edges:
        endpoints = np.array([coords[e.source], coords[e.target]], dtype=np.float64)
        g = frame.to_grid(endpoints)
        polylines.append(g)
        degenerate.append(bool(np.all(g[0] == g[1])))

    ew = np.array([e.weight for e in edges], dtype=np.float64)
    h = h0_cells
    for it in range(config.iterations):
        for idx in range(len(edges)):
            if degenerate[idx]:
                continue
            polylines[idx], _ = resample_polyline(polylines[idx], max_seg_cells)
        # concatenate interior points in canonical order so the density sum
        # is independent of the caller's edge ordering
        offsets = np.zeros(len(edges) + 1, dtype=np.int64)
        for idx, poly in enumerate(polylines):
            offsets[idx + 1] = offsets[idx] + poly.shape[0]
        total = int(offsets[-1])
        xs = np.empty(total)
        ys = np.empty(total)
        wpt: list[np.ndarray] = []
        interior_rows: list[np.ndarray] = []
        interior_cols: list[np.ndarray] = []
        for idx, poly in enumerate(polylines):
            xs[offsets[idx] : offsets[idx + 1]] = poly[:, 0]
            ys[offsets[idx] : offsets[idx + 1]] = poly[:, 1]
            if poly.shape[0] > 2 and not degenerate[idx]:
                inner = poly[1:-1]
                interior_cols.append(np.floor(inner[:, 0] + 0.5).astype(np.int64))
                interior_rows.append(np.floor(inner[:, 1] + 0.5).astype(np.int64))
                wpt.append(np.full(inner.shape[0], ew[idx]))

        density = np.zeros((config.grid_size, config.grid_size), dtype=np.float64)
        if interior_rows:
            stamp, radius = _gaussian_stamp(h)
            _splat_points(
                density,
                np.concatenate(interior_rows),
                np.concatenate(interior_cols),
                np.concatenate(wpt),
                stamp,
                radius,
            )
        _advect_points(
            xs,
            ys,
            offsets,
            density,
            config.step,
            h,
            1e-9,
            config.gradient_reg,
            0.0,
            frame.hi_gx,
            0.0,
            frame.hi_gy,
        )
        for idx in range(len(edges)):
            poly = np.stack(
                [xs[offsets[idx] : offsets[idx + 1]], ys[offsets[idx] : offsets[idx + 1]]], axis=1
            )
            if poly.shape[0] > 2:
                lam = config.smoothing
                smoothed = poly.copy()
                smoothed[1:-1] = poly[1:-1] + lam * (0.5 * (poly[:-2] + poly[2:]) - poly[1:-1])
                poly = smoothed
            if not np.all(np.isfinite(poly)):
                e = edges[idx]
                raise BundlingError(
                    f"non-finite control point on edge {e.source}->{e.target} at iteration {it}"
                )
            polylines[idx] = poly
        h = max(h * config.decay, config.min_bandwidth)

    out: list[BundledEdge] = []
    for idx, e in enumerate(edges):
        simplified = douglas_peucker(polylines[idx], 0.25)
        world = frame.to_world(simplified)
        world[0] = coords[e.source]
        world[-1] = coords[e.target]
        out.append(BundledEdge(source=e.source, target=e.target, weight=e.weight, points=world))
    return out


# ---------------------------------------------------------------------------
# Edge derivation from citation lists
# ---------------------------------------------------------------------------


def derive_citation_edges(
    citing_to_cited: dict[str, list[str]], corpus_pmids: set[str]
) -> list[RawEdge]:
    """Direct links: one weight-1 edge per (citing, cited) pair inside the corpus."""
    edges: set[tuple[str, str]] = set()
    for citing, cited_list in citing_to_cited.items():
        if citing not in corpus_pmids:
            continue
        for cited in set(cited_list):
            if cited == citing or cited not in corpus_pmids:
                continue
            edges.add((citing, cited))
    return [RawEdge(source=s, target=t, weight=1.0) for s, t in sorted(edges)]


def derive_cocitation_edges(
    citing_to_cited: dict[str, list[str]],
    corpus_pmids: set[str],
    min_weight: int = 2,
) -> list[RawEdge]:
    """Two articles are linked with weight = number of papers citing both.

    Pairs below min_weight are dropped; the citing papers themselves need not
    be part of the corpus.
    """
    pair_counts: dict[tuple[str, str], int] = {}
    for _citing, cited_list in citing_to_cited.items():
        members = sorted({p for p in cited_list if p in corpus_pmids})
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                key = (members[i], members[j])
                pair_counts[key] = pair_counts.get(key, 0) + 1
    return [
        RawEdge(source=s, target=t, weight=float(c))
        for (s, t), c in sorted(pair_counts.items())
        if c >= min_weight
    ]
