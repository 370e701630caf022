"""Density clustering of the 2D map and the multi-level cluster tree.

Single-level extraction follows the HDBSCAN recipe: mutual-reachability
distances, a minimum spanning tree, a condensed dendrogram, and
excess-of-mass cluster selection.  The tree is built by re-clustering at a
fine-to-coarse schedule of minimum cluster sizes and parenting each cluster
under the next-coarser cluster that absorbs at least ``theta`` of its
members; clusters without such a parent stay as roots.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

NOISE = -1
LAMBDA_CAP = 1e12  # lambda = 1/distance, capped so coincident points stay finite


class ClusteringError(Exception):
    pass


@dataclass
class MstEdge:
    weight: float
    a: int
    b: int


@dataclass
class FlatClustering:
    labels: np.ndarray  # per-point cluster id, NOISE for unclustered
    stabilities: dict[int, float]  # cluster id -> excess-of-mass stability

    @property
    def n_clusters(self) -> int:
        return len(self.stabilities)


@dataclass
class ClusterNode:
    cluster_id: int
    level: int  # 0 = finest
    members: list[str]  # pmids, sorted
    parent_id: int | None
    stability: float
    label: str = ""


@dataclass
class ClusterTree:
    nodes: list[ClusterNode]
    n_levels: int
    assignments: dict[str, int] = field(default_factory=dict)  # pmid -> finest cluster id

    def by_id(self) -> dict[int, ClusterNode]:
        return {node.cluster_id: node for node in self.nodes}

    def level_nodes(self, level: int) -> list[ClusterNode]:
        return [node for node in self.nodes if node.level == level]

    def children_of(self, cluster_id: int) -> list[ClusterNode]:
        return [node for node in self.nodes if node.parent_id == cluster_id]

    def roots(self) -> list[ClusterNode]:
        return [node for node in self.nodes if node.parent_id is None]

    def to_jsonable(self) -> dict:
        return {
            "n_levels": self.n_levels,
            "nodes": [
                {
                    "cluster_id": node.cluster_id,
                    "level": node.level,
                    "parent_id": node.parent_id,
                    "member_pmids": node.members,
                    "stability": node.stability,
                    "label": node.label,
                }
                for node in sorted(self.nodes, key=lambda nd: nd.cluster_id)
            ],
        }


def core_distances(points: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance from each point to its min_samples-th nearest other point."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if not n > min_samples >= 1:
        raise ClusteringError(f"need n > min_samples >= 1, got n={n}, min_samples={min_samples}")
    cores = np.zeros(n)
    block = 1024
    sq_norms = np.sum(pts * pts, axis=1)
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq_norms[start:stop, None] + sq_norms[None, :] - 2.0 * (pts[start:stop] @ pts.T)
        np.maximum(d2, 0.0, out=d2)
        # row includes the self-distance 0, so the k-th nearest *other* point
        # sits at partition index k
        part = np.partition(d2, min_samples, axis=1)[:, min_samples]
        cores[start:stop] = np.sqrt(part)
    return cores


def mutual_reachability_matrix(points: np.ndarray, min_samples: int) -> np.ndarray:
    """Dense mreach(a,b) = max(core(a), core(b), d(a,b)); for small n."""
    pts = np.asarray(points, dtype=np.float64)
    cores = core_distances(pts, min_samples)
    sq = np.sum(pts * pts, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    np.maximum(d2, 0.0, out=d2)
    dist = np.sqrt(d2)
    mreach = np.maximum(dist, np.maximum(cores[:, None], cores[None, :]))
    np.fill_diagonal(mreach, 0.0)
    return mreach


def mst_mutual_reachability(
    points: np.ndarray, min_samples: int, pmids: list[str] | None = None
) -> list[MstEdge]:
    """Prim MST over mutual-reachability distances, O(n^2) time, O(n) memory.

    Equal-weight edges are ordered by (min pmid, max pmid) so the tree and
    everything downstream of it are deterministic.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n < 2:
        raise ClusteringError("need at least 2 points")
    keys: list = list(pmids) if pmids is not None else list(range(n))
    if len(keys) != n:
        raise ClusteringError("pmids length must match points")
    cores = core_distances(pts, min_samples)

    def edge_key(w: float, u: int, v: int):
        lo, hi = (keys[u], keys[v]) if keys[u] <= keys[v] else (keys[v], keys[u])
        return (w, lo, hi)

    def mreach_row(v: int) -> np.ndarray:
        d = np.sqrt(np.maximum(np.sum((pts - pts[v]) ** 2, axis=1), 0.0))
        return np.maximum(d, np.maximum(cores, cores[v]))

    start = min(range(n), key=lambda i: keys[i])
    in_tree = np.zeros(n, dtype=bool)
    in_tree[start] = True
    best_w = mreach_row(start)
    best_from = np.full(n, start, dtype=np.int64)

    edges: list[MstEdge] = []
    for _ in range(n - 1):
        chosen = -1
        chosen_key = None
        for v in range(n):
            if in_tree[v]:
                continue
            k = edge_key(best_w[v], best_from[v], v)
            if chosen_key is None or k < chosen_key:
                chosen_key = k
                chosen = v
        u = int(best_from[chosen])
        edges.append(MstEdge(weight=float(best_w[chosen]), a=u, b=chosen))
        in_tree[chosen] = True
        row = mreach_row(chosen)
        for v in range(n):
            if in_tree[v]:
                continue
            if edge_key(row[v], chosen, v) < edge_key(best_w[v], best_from[v], v):
                best_w[v] = row[v]
                best_from[v] = chosen
    edges.sort(key=lambda e: edge_key(e.weight, e.a, e.b))
    return edges


# ---------------------------------------------------------------------------
# Condensed dendrogram and excess-of-mass extraction
# ---------------------------------------------------------------------------


def _single_linkage(mst: list[MstEdge], n: int):
    """Union MST edges in ascending order into a binary merge tree.

    Returns (left, right, dist, size) arrays for internal nodes n .. 2n-2;
    node ids < n are leaves.
    """
    parent = list(range(2 * n - 1))

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    left = np.zeros(n - 1, dtype=np.int64)
    right = np.zeros(n - 1, dtype=np.int64)
    dist = np.zeros(n - 1, dtype=np.float64)
    size = np.ones(2 * n - 1, dtype=np.int64)
    nxt = n
    for e in mst:
        ra, rb = find(e.a), find(e.b)
        left[nxt - n] = ra
        right[nxt - n] = rb
        dist[nxt - n] = e.weight
        size[nxt] = size[ra] + size[rb]
        parent[ra] = nxt
        parent[rb] = nxt
        nxt += 1
    return left, right, dist, size


def _leaves_under(node: int, n: int, left, right) -> list[int]:
    out: list[int] = []
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur < n:
            out.append(cur)
        else:
            stack.append(int(left[cur - n]))
            stack.append(int(right[cur - n]))
    return out


def _to_lambda(distance: float) -> float:
    if distance <= 0.0:
        return LAMBDA_CAP
    return min(1.0 / distance, LAMBDA_CAP)


@dataclass
class _Condensed:
    birth: list[float]  # lambda at which each condensed cluster appears
    parent: list[int]  # condensed parent id, -1 for root
    children: list[list[int]]
    point_rows: list[list[tuple[int, float]]]  # (point, lambda it leaves the cluster)
    split_rows: list[list[tuple[int, float, int]]]  # (child cluster, lambda, size)

    def new_cluster(self, birth: float, parent: int) -> int:
        self.birth.append(birth)
        self.parent.append(parent)
        self.children.append([])
        self.point_rows.append([])
        self.split_rows.append([])
        if parent >= 0:
            self.children[parent].append(len(self.birth) - 1)
        return len(self.birth) - 1


def _condense(mst: list[MstEdge], n: int, min_cluster_size: int) -> _Condensed:
    left, right, dist, size = _single_linkage(mst, n)
    tree = _Condensed(birth=[], parent=[], children=[], point_rows=[], split_rows=[])
    root_cc = tree.new_cluster(birth=0.0, parent=-1)
    # walk the merge tree top-down; each frame carries the condensed cluster
    # the linkage node currently feeds
    stack: list[tuple[int, int]] = [(2 * n - 2, root_cc)]
    while stack:
        node, cc = stack.pop()
        if node < n:
            # singleton reached without ever splitting: it leaves at the cap
            tree.point_rows[cc].append((node, LAMBDA_CAP))
            continue
        lam = _to_lambda(dist[node - n])
        lo, hi = int(left[node - n]), int(right[node - n])
        big_lo = size[lo] >= min_cluster_size
        big_hi = size[hi] >= min_cluster_size
        if big_lo and big_hi:
            cc_lo = tree.new_cluster(birth=lam, parent=cc)
            cc_hi = tree.new_cluster(birth=lam, parent=cc)
            tree.split_rows[cc].append((cc_lo, lam, int(size[lo])))
            tree.split_rows[cc].append((cc_hi, lam, int(size[hi])))
            stack.append((lo, cc_lo))
            stack.append((hi, cc_hi))
        elif big_lo or big_hi:
            keep, drop = (lo, hi) if big_lo else (hi, lo)
            for leaf in _leaves_under(drop, n, left, right):
                tree.point_rows[cc].append((leaf, lam))
            stack.append((keep, cc))
        else:
            # both sides below the size floor: the cluster dies here and all
            # remaining points leave at this density
            for leaf in _leaves_under(node, n, left, right):
                tree.point_rows[cc].append((leaf, lam))
    return tree


def _stabilities(tree: _Condensed) -> list[float]:
    out = []
    for cc in range(len(tree.birth)):
        birth = tree.birth[cc]
        total = 0.0
        count = 0
        for _point, lam in tree.point_rows[cc]:
            total += lam
            count += 1
        for _child, lam, sz in tree.split_rows[cc]:
            total += lam * sz
            count += sz
        out.append(total - birth * count)
    return out


def _select_eom(tree: _Condensed, stability: list[float]) -> list[bool]:
    """Bottom-up excess-of-mass: a cluster is kept iff its own stability is at
    least the summed stability of its selected descendants."""
    m = len(tree.birth)
    selected = [False] * m
    propagated = [0.0] * m
    for cc in range(m - 1, -1, -1):  # children always have larger ids
        kids = tree.children[cc]
        child_sum = sum(propagated[k] for k in kids)
        if not kids or stability[cc] >= child_sum:
            selected[cc] = True
            propagated[cc] = stability[cc]
        else:
            propagated[cc] = child_sum
    # enforce the antichain: nothing below a selected cluster stays selected
    final = [False] * m
    blocked = [False] * m
    for cc in range(m):
        p = tree.parent[cc]
        if p >= 0 and (blocked[p] or final[p]):
            blocked[cc] = True
        elif selected[cc]:
            final[cc] = True
    return final


def extract_flat(mst: list[MstEdge], n: int, min_cluster_size: int) -> FlatClustering:
    """Flat clustering with noise from the condensed dendrogram."""
    if min_cluster_size < 2:
        raise ClusteringError("min_cluster_size must be >= 2")
    if min_cluster_size > n:
        warnings.warn(
            f"min_cluster_size {min_cluster_size} exceeds point count {n}; everything is noise",
            stacklevel=2,
        )
        return FlatClustering(labels=np.full(n, NOISE, dtype=np.int64), stabilities={})
    tree = _condense(mst, n, min_cluster_size)
    stability = _stabilities(tree)
    final = _select_eom(tree, stability)

    # map each condensed cluster to its selected ancestor (itself included)
    owner = [-1] * len(tree.birth)
    for cc in range(len(tree.birth)):
        p = tree.parent[cc]
        if final[cc]:
            owner[cc] = cc
        elif p >= 0:
            owner[cc] = owner[p]

    labels = np.full(n, NOISE, dtype=np.int64)
    members: dict[int, list[int]] = {}
    for cc in range(len(tree.birth)):
        own = owner[cc]
        if own < 0:
            continue
        for point, _lam in tree.point_rows[cc]:
            members.setdefault(own, []).append(point)
    # stable ids: clusters numbered by their smallest member index
    ordered = sorted(members.items(), key=lambda kv: min(kv[1]))
    stabilities: dict[int, float] = {}
    for new_id, (cc, pts) in enumerate(ordered):
        for p in pts:
            labels[p] = new_id
        stabilities[new_id] = stability[cc]
    return FlatClustering(labels=labels, stabilities=stabilities)


def cluster_once(
    points: np.ndarray, min_cluster_size: int, min_samples: int, pmids: list[str] | None = None
) -> FlatClustering:
    mst = mst_mutual_reachability(points, min_samples, pmids)
    return extract_flat(mst, len(points), min_cluster_size)


# ---------------------------------------------------------------------------
# Multi-level tree
# ---------------------------------------------------------------------------


def default_schedule(n: int) -> list[tuple[int, int]]:
    """Fine-to-coarse minimum cluster sizes at 0.5%, 2% and 8% of the corpus."""
    return [(max(5, round(n * q)), 5) for q in (0.005, 0.02, 0.08)]


def build_hierarchy(
    points: np.ndarray,
    pmids: list[str],
    schedule: list[tuple[int, int]] | None = None,
    theta: float = 0.6,
) -> ClusterTree:
    """Cluster at every schedule level and parent fine clusters under coarse ones.

    A level-l cluster is parented under the cluster at the next non-empty
    coarser level holding the largest fraction of its members, provided that
    fraction reaches ``theta``; otherwise it remains a root.  theta > 0.5
    makes the parent unique whenever it exists.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if len(pmids) != n:
        raise ClusteringError("pmids length must match points")
    if not 0.5 < theta <= 1.0:
        raise ClusteringError("theta must be in (0.5, 1]")
    schedule = schedule if schedule is not None else default_schedule(n)
    if not schedule:
        raise ClusteringError("schedule must be non-empty")
    sizes = [m for m, _ in schedule]
    if sizes != sorted(sizes):
        raise ClusteringError("schedule must be ordered fine to coarse (non-decreasing sizes)")

    mst_cache: dict[int, list[MstEdge]] = {}
    level_results: list[FlatClustering] = []
    for m, min_samples in schedule:
        if min_samples not in mst_cache:
            mst_cache[min_samples] = mst_mutual_reachability(pts, min_samples, pmids)
        level_results.append(extract_flat(mst_cache[min_samples], n, m))

    # member index sets per (level, local id)
    level_members: list[list[set[int]]] = []
    for flat in level_results:
        groups: dict[int, set[int]] = {}
        for idx, lab in enumerate(flat.labels):
            if lab != NOISE:
                groups.setdefault(int(lab), set()).add(idx)
        level_members.append([groups[k] for k in sorted(groups)])

    # global ids ordered by (level, smallest member pmid)
    keyed: list[tuple[int, str, int]] = []  # (level, min pmid, local id)
    for level, groups in enumerate(level_members):
        for local_id, mem in enumerate(groups):
            keyed.append((level, min(pmids[i] for i in mem), local_id))
    keyed.sort()
    global_id: dict[tuple[int, int], int] = {}
    for gid, (level, _min_pmid, local_id) in enumerate(keyed):
        global_id[(level, local_id)] = gid

    n_levels = len(schedule)
    nodes: list[ClusterNode] = []
    for level, groups in enumerate(level_members):
        for local_id, mem in enumerate(groups):
            parent_id: int | None = None
            upper = level + 1
            while upper < n_levels and not level_members[upper]:
                upper += 1  # empty level: look through it to the next coarser one
            if upper < n_levels:
                best_frac = -1.0
                best_local = -1
                for up_local, up_mem in enumerate(level_members[upper]):
                    frac = len(mem & up_mem) / len(mem)
                    if frac > best_frac:
                        best_frac = frac
                        best_local = up_local
                if best_frac >= theta:
                    parent_id = global_id[(upper, best_local)]
            nodes.append(
                ClusterNode(
                    cluster_id=global_id[(level, local_id)],
                    level=level,
                    members=sorted(pmids[i] for i in mem),
                    parent_id=parent_id,
                    stability=level_results[level].stabilities[local_id],
                )
            )
    nodes.sort(key=lambda nd: nd.cluster_id)

    assignments: dict[str, int] = {pmid: NOISE for pmid in pmids}
    for local_id, mem in enumerate(level_members[0]):
        gid = global_id[(0, local_id)]
        for i in mem:
            assignments[pmids[i]] = gid
    return ClusterTree(nodes=nodes, n_levels=n_levels, assignments=assignments)
