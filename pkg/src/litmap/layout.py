"""2D projection of the embedding matrix.

Two routes: a sampled attraction/repulsion layout over a weighted kNN graph
(the default; scales linearly in edge samples) and an exact t-SNE fallback
for small corpora.  Both are deterministic for a fixed seed in
single-threaded mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .embedding import EmbeddingMatrix


class LayoutError(Exception):
    pass


@dataclass
class KnnGraph:
    n: int
    k: int
    edges: list[tuple[int, int, float]]  # (i, j, w) with i < j, w in (0, 1]
    sigmas: np.ndarray
    row_ids: list[str]

    def neighbor_sets(self) -> list[set[int]]:
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for i, j, _ in self.edges:
            nbrs[i].add(j)
            nbrs[j].add(i)
        return nbrs


@dataclass
class Layout2D:
    coordinates: np.ndarray  # (n, 2) float64
    seed: int
    method: str  # "largevis" | "tsne"
    final_objective: float
    objective_history: list[tuple[int, float]] = field(default_factory=list)

    def report(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "final_objective": self.final_objective,
            "n_points": int(self.coordinates.shape[0]),
        }


def l2_normalize_rows(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    norms = np.linalg.norm(values, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return values / norms


def pairwise_distances(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    b = a if b is None else b
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    return np.sqrt(sq)


def conditional_probabilities(
    distances_row: np.ndarray, target_perplexity: float, tol: float = 1e-5, max_iter: int = 50
) -> tuple[np.ndarray, float]:
    """Neighbor probabilities p_j ~ exp(-d_j^2 / 2 sigma^2) with sigma tuned so the
    effective neighbor count 2^H matches target_perplexity.

    Returns (p_row summing to 1, sigma).  Identical distances make sigma
    unbounded; that case returns the uniform row directly.
    """
    d = np.asarray(distances_row, dtype=np.float64)
    m = d.shape[0]
    if m < 2:
        raise LayoutError("need at least 2 distances")
    if not np.all(np.isfinite(d)):
        raise LayoutError("distances must be finite")
    if not (1.0 < target_perplexity <= m):
        raise LayoutError(f"target_perplexity must be in (1, {m}]")
    if np.all(d == d[0]) or target_perplexity == m:
        # sigma -> infinity limit: every neighbor equally likely
        return np.full(m, 1.0 / m), math.inf

    d2 = d * d
    d2 = d2 - d2.min()  # shift-invariant; keeps exp() in range
    target_entropy = math.log(target_perplexity)  # nats

    beta = 1.0
    beta_min, beta_max = -math.inf, math.inf
    p = np.empty(m)
    for _ in range(max_iter):
        np.exp(-d2 * beta, out=p)
        total = p.sum()
        p /= total
        entropy = math.log(total) + beta * float(np.dot(d2, p))
        if abs(math.exp(entropy) - target_perplexity) <= tol:
            break
        if entropy > target_entropy:
            beta_min = beta
            beta = beta * 2.0 if beta_max == math.inf else (beta + beta_max) / 2.0
        else:
            beta_max = beta
            beta = beta / 2.0 if beta_min == -math.inf else (beta + beta_min) / 2.0
    sigma = math.sqrt(1.0 / (2.0 * beta))
    return p, sigma


def build_knn_graph(matrix: EmbeddingMatrix, k: int, perplexity: float) -> KnnGraph:
    """Weighted kNN graph on Euclidean distances over L2-normalized rows.

    Per-node neighbor probabilities are symmetrized by averaging:
    w_ij = (p_{j|i} + p_{i|j}) / 2, zero entries dropped.
    """
    if k < 2:
        raise LayoutError("k must be >= 2")
    if not (1.0 < perplexity <= k):
        raise LayoutError("perplexity must be in (1, k]")
    n = matrix.n
    if n <= k:
        raise LayoutError(f"need more than k={k} rows, got {n}")
    rows = l2_normalize_rows(matrix.values)
    ids = matrix.row_ids

    sigmas = np.zeros(n)
    cond: dict[tuple[int, int], float] = {}
    block = 512
    for start in range(0, n, block):
        stop = min(start + block, n)
        dists = pairwise_distances(rows[start:stop], rows)
        for i in range(start, stop):
            drow = dists[i - start]
            # k nearest others; ties by ascending pmid so clones are stable
            order = sorted((j for j in range(n) if j != i), key=lambda j: (drow[j], ids[j]))
            nbrs = order[:k]
            p_row, sigma = conditional_probabilities(drow[nbrs], perplexity)
            sigmas[i] = sigma
            for j, p in zip(nbrs, p_row):
                if p > 0.0:
                    cond[(i, j)] = p

    edges: list[tuple[int, int, float]] = []
    seen: set[tuple[int, int]] = set()
    for (i, j), p in cond.items():
        a, b = (i, j) if i < j else (j, i)
        if (a, b) in seen:
            continue
        seen.add((a, b))
        w = (cond.get((a, b), 0.0) + cond.get((b, a), 0.0)) / 2.0
        if w > 0.0:
            edges.append((a, b, w))
    edges.sort(key=lambda e: (e[0], e[1]))
    return KnnGraph(n=n, k=k, edges=edges, sigmas=sigmas, row_ids=list(ids))


# ---------------------------------------------------------------------------
# Sampled SGD layout
# ---------------------------------------------------------------------------


@dataclass
class LayoutConfig:
    negatives: int = 5
    gamma: float = 7.0
    rho0: float = 1.0
    n_updates: int | None = None  # default 200 * n * k edge samples
    clip: float = 5.0
    threads: int = 1  # >1 trades determinism for throughput


def build_alias_table(weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias table for O(1) categorical sampling; deterministic layout."""
    w = np.asarray(weights, dtype=np.float64)
    kcat = w.shape[0]
    prob = w * (kcat / w.sum())
    alias = np.zeros(kcat, dtype=np.int64)
    q = np.zeros(kcat, dtype=np.float64)
    small = [i for i in range(kcat) if prob[i] < 1.0]
    large = [i for i in range(kcat) if prob[i] >= 1.0]
    while small and large:
        s = small.pop()
        l = large.pop()
        q[s] = prob[s]
        alias[s] = l
        prob[l] = (prob[l] + prob[s]) - 1.0
        if prob[l] < 1.0:
            small.append(l)
        else:
            large.append(l)
    for i in large:
        q[i] = 1.0
    for i in small:
        q[i] = 1.0
    return q, alias


@njit(cache=False)
def _rng_next(state):
    # splitmix64: explicit state keeps runs bit-reproducible
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=False)
def _is_neighbor(indptr, indices, i, cand):
    lo = indptr[i]
    hi = indptr[i + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        v = indices[mid]
        if v == cand:
            return True
        if v < cand:
            lo = mid + 1
        else:
            hi = mid
    return False


@njit(cache=False)
def _clip(v, c):
    if v > c:
        return c
    if v < -c:
        return -c
    return v


@njit(cache=False)
def _sgd_updates(
    pos, ei, ej, q, alias, indptr, indices, n_updates, negatives, gamma, rho0, clip, seed
):
    n = pos.shape[0]
    n_edges = ei.shape[0]
    state = np.uint64(seed) * np.uint64(6364136223846793005) + np.uint64(1442695040888963407)
    inv53 = 1.0 / 9007199254740992.0
    for t in range(n_updates):
        rho = rho0 * (1.0 - t / n_updates)
        state, z = _rng_next(state)
        idx = np.int64(z % np.uint64(n_edges))
        state, z = _rng_next(state)
        u = (z >> np.uint64(11)) * inv53
        e = idx if u < q[idx] else alias[idx]
        i = ei[e]
        j = ej[e]

        dx = pos[i, 0] - pos[j, 0]
        dy = pos[i, 1] - pos[j, 1]
        d2 = dx * dx + dy * dy
        g = -2.0 / (1.0 + d2)  # gradient of log f, f(d) = 1/(1+d^2)
        gx = _clip(g * dx, clip)
        gy = _clip(g * dy, clip)
        pos[i, 0] += rho * gx
        pos[i, 1] += rho * gy
        pos[j, 0] -= rho * gx
        pos[j, 1] -= rho * gy

        for _m in range(negatives):
            cand = np.int64(-1)
            for _attempt in range(10):
                state, z = _rng_next(state)
                c = np.int64(z % np.uint64(n))
                if c == i or c == j:
                    continue
                if _is_neighbor(indptr, indices, i, c):
                    continue
                cand = c
                break
            if cand < 0:
                continue
            dx = pos[i, 0] - pos[cand, 0]
            dy = pos[i, 1] - pos[cand, 1]
            d2 = dx * dx + dy * dy
            g = gamma * 2.0 / ((d2 + 1e-12) * (1.0 + d2))  # gradient of log(1 - f)
            gx = _clip(g * dx, clip)
            gy = _clip(g * dy, clip)
            pos[i, 0] += rho * gx
            pos[i, 1] += rho * gy
            pos[cand, 0] -= rho * gx
            pos[cand, 1] -= rho * gy

        if not (np.isfinite(pos[i, 0]) and np.isfinite(pos[i, 1])):
            return t, i
        if not (np.isfinite(pos[j, 0]) and np.isfinite(pos[j, 1])):
            return t, j
    return -1, -1


@njit(cache=False, parallel=True)
def _sgd_updates_async(
    pos, ei, ej, q, alias, indptr, indices, n_updates, negatives, gamma, rho0, clip, seed, threads
):
    # Lock-free asynchronous mode: racing writes are accepted, so this path
    # carries no determinism guarantee.
    n = pos.shape[0]
    n_edges = ei.shape[0]
    per = n_updates // threads
    inv53 = 1.0 / 9007199254740992.0
    for tid in prange(threads):
        state = (np.uint64(seed) + np.uint64(tid)) * np.uint64(6364136223846793005) + np.uint64(
            1442695040888963407
        )
        for t in range(per):
            rho = rho0 * (1.0 - t / per)
            state, z = _rng_next(state)
            idx = np.int64(z % np.uint64(n_edges))
            state, z = _rng_next(state)
            u = (z >> np.uint64(11)) * inv53
            e = idx if u < q[idx] else alias[idx]
            i = ei[e]
            j = ej[e]
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            d2 = dx * dx + dy * dy
            g = -2.0 / (1.0 + d2)
            gx = _clip(g * dx, clip)
            gy = _clip(g * dy, clip)
            pos[i, 0] += rho * gx
            pos[i, 1] += rho * gy
            pos[j, 0] -= rho * gx
            pos[j, 1] -= rho * gy
            for _m in range(negatives):
                cand = np.int64(-1)
                for _attempt in range(10):
                    state, z = _rng_next(state)
                    c = np.int64(z % np.uint64(n))
                    if c == i or c == j:
                        continue
                    if _is_neighbor(indptr, indices, i, c):
                        continue
                    cand = c
                    break
                if cand < 0:
                    continue
                dx = pos[i, 0] - pos[cand, 0]
                dy = pos[i, 1] - pos[cand, 1]
                d2 = dx * dx + dy * dy
                g = gamma * 2.0 / ((d2 + 1e-12) * (1.0 + d2))
                gx = _clip(g * dx, clip)
                gy = _clip(g * dy, clip)
                pos[i, 0] += rho * gx
                pos[i, 1] += rho * gy
                pos[cand, 0] -= rho * gx
                pos[cand, 1] -= rho * gy


def _adjacency_csr(graph: KnnGraph) -> tuple[np.ndarray, np.ndarray]:
    nbrs = graph.neighbor_sets()
    indptr = np.zeros(graph.n + 1, dtype=np.int64)
    for i, s in enumerate(nbrs):
        indptr[i + 1] = indptr[i] + len(s)
    indices = np.zeros(indptr[-1], dtype=np.int64)
    for i, s in enumerate(nbrs):
        indices[indptr[i] : indptr[i + 1]] = sorted(s)
    return indptr, indices


def attraction_kernel(d: float) -> float:
    """Similarity kernel f(d) = 1 / (1 + d^2) shared by both layout methods."""
    return 1.0 / (1.0 + d * d)


def largevis_objective(
    graph: KnnGraph, coords: np.ndarray, gamma: float, max_pairs: int = 4_000_000
) -> float:
    """Log-likelihood of the layout: sum_E w*log f(d) + gamma * sum_nonE log(1 - f(d)).

    Exact for small n; above ~sqrt(max_pairs) points the non-edge term is a
    deterministic subsample scaled to the full count.
    """
    coords = np.asarray(coords, dtype=np.float64)
    n = coords.shape[0]
    pos_term = 0.0
    for i, j, w in graph.edges:
        d2 = float(np.sum((coords[i] - coords[j]) ** 2))
        pos_term += w * math.log(1.0 / (1.0 + d2))
    edge_set = {(i, j) for i, j, _ in graph.edges}

    def neg_log(i: int, j: int) -> float:
        d2 = float(np.sum((coords[i] - coords[j]) ** 2))
        return math.log(max(d2 / (1.0 + d2), 1e-300))

    total_pairs = n * (n - 1) // 2
    neg_term = 0.0
    if total_pairs <= max_pairs:
        for i in range(n):
            for j in range(i + 1, n):
                if (i, j) not in edge_set:
                    neg_term += neg_log(i, j)
    else:
        rng = np.random.default_rng(0)
        sample = max_pairs // 4
        count = 0
        acc = 0.0
        for _ in range(sample):
            i = int(rng.integers(0, n))
            j = int(rng.integers(0, n))
            if i == j:
                continue
            a, b = (i, j) if i < j else (j, i)
            if (a, b) in edge_set:
                continue
            acc += neg_log(a, b)
            count += 1
        non_edges = total_pairs - len(edge_set)
        neg_term = acc / max(count, 1) * non_edges
    return pos_term + gamma * neg_term


def fit_largevis(graph: KnnGraph, seed: int, config: LayoutConfig | None = None) -> Layout2D:
    """Optimize the layout by sampled edge attraction and uniform negative repulsion.

    Edges are drawn proportionally to their weight through an alias table;
    each draw applies the attractive gradient to both endpoints, then repels
    the tail from ``negatives`` uniform non-neighbors.  The learning rate
    decays linearly to zero.
    """
    config = config or LayoutConfig()
    if config.negatives < 1 or config.gamma <= 0 or config.rho0 <= 0:
        raise LayoutError("config values must be positive")
    if not graph.edges:
        raise LayoutError("graph has no edges")
    n = graph.n
    n_updates = config.n_updates if config.n_updates is not None else 200 * n * graph.k

    rng = np.random.default_rng(seed)
    pos = rng.uniform(-1.0, 1.0, size=(n, 2))

    ei = np.array([e[0] for e in graph.edges], dtype=np.int64)
    ej = np.array([e[1] for e in graph.edges], dtype=np.int64)
    weights = np.array([e[2] for e in graph.edges], dtype=np.float64)
    q, alias = build_alias_table(weights)
    indptr, indices = _adjacency_csr(graph)

    if config.threads > 1:
        _sgd_updates_async(
            pos, ei, ej, q, alias, indptr, indices,
            n_updates, config.negatives, config.gamma, config.rho0, config.clip,
            seed, config.threads,
        )
        if not np.all(np.isfinite(pos)):
            raise LayoutError("non-finite coordinates after asynchronous optimization")
    else:
        bad_t, bad_i = _sgd_updates(
            pos, ei, ej, q, alias, indptr, indices,
            n_updates, config.negatives, config.gamma, config.rho0, config.clip,
            seed,
        )
        if bad_t >= 0:
            raise LayoutError(f"non-finite coordinate at update {bad_t}, node {bad_i}")

    objective = largevis_objective(graph, pos, config.gamma)
    return Layout2D(coordinates=pos, seed=seed, method="largevis", final_objective=objective)


# ---------------------------------------------------------------------------
# Exact t-SNE fallback
# ---------------------------------------------------------------------------


@dataclass
class TsneConfig:
    iters: int = 1000
    early_exaggeration: float = 12.0
    early_iters: int = 250
    learning_rate: float = 200.0
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    momentum_switch: int = 250
    exact_cap: int = 5000
    kl_check_every: int = 50


def joint_probabilities(matrix: EmbeddingMatrix, perplexity: float) -> np.ndarray:
    """Symmetrized, normalized neighbor probabilities: P = (Pc + Pc^T) / 2n."""
    rows = l2_normalize_rows(matrix.values)
    n = rows.shape[0]
    dists = pairwise_distances(rows)
    p_cond = np.zeros((n, n))
    for i in range(n):
        others = np.concatenate([np.arange(i), np.arange(i + 1, n)])
        p_row, _ = conditional_probabilities(dists[i, others], perplexity)
        p_cond[i, others] = p_row
    return (p_cond + p_cond.T) / (2.0 * n)


def kl_divergence_and_gradient(P: np.ndarray, Y: np.ndarray) -> tuple[float, np.ndarray]:
    """KL(P || Q) for the heavy-tailed kernel and its exact gradient wrt Y."""
    Y = np.asarray(Y, dtype=np.float64)
    n = Y.shape[0]
    d2 = np.sum(Y * Y, axis=1)[:, None] + np.sum(Y * Y, axis=1)[None, :] - 2.0 * (Y @ Y.T)
    np.maximum(d2, 0.0, out=d2)
    num = 1.0 / (1.0 + d2)
    np.fill_diagonal(num, 0.0)
    z = num.sum()
    Q = num / z
    mask = P > 0
    kl = float(np.sum(P[mask] * np.log(P[mask] / np.maximum(Q[mask], 1e-300))))
    PQ = (P - Q) * num
    grad = 4.0 * (np.diag(PQ.sum(axis=1)) @ Y - PQ @ Y)
    return kl, grad


def fit_tsne_exact(
    matrix: EmbeddingMatrix,
    perplexity: float,
    seed: int,
    config: TsneConfig | None = None,
) -> Layout2D:
    """Full-gradient t-SNE with early exaggeration and a momentum schedule."""
    config = config or TsneConfig()
    n = matrix.n
    if n > config.exact_cap:
        raise LayoutError(f"exact mode capped at {config.exact_cap} points, got {n}")
    if perplexity >= n - 1:
        raise LayoutError(f"perplexity {perplexity} must be < n - 1 = {n - 1}")

    P = joint_probabilities(matrix, perplexity)
    rng = np.random.default_rng(seed)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)

    history: list[tuple[int, float]] = []
    for it in range(config.iters):
        exaggerating = it < config.early_iters
        P_eff = P * config.early_exaggeration if exaggerating else P
        kl, grad = kl_divergence_and_gradient(P_eff, Y)
        momentum = config.momentum_start if it < config.momentum_switch else config.momentum_final

        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        velocity = momentum * velocity - config.learning_rate * gains * grad
        Y = Y + velocity
        if not np.all(np.isfinite(Y)):
            raise LayoutError(f"non-finite coordinate at iteration {it}")

        if not exaggerating and (it + 1) % config.kl_check_every == 0:
            true_kl, _ = kl_divergence_and_gradient(P, Y)
            history.append((it + 1, true_kl))

    final_kl, _ = kl_divergence_and_gradient(P, Y)
    return Layout2D(
        coordinates=Y,
        seed=seed,
        method="tsne",
        final_objective=final_kl,
        objective_history=history,
    )
