"""Per-article vectors: file I/O, a deterministic hashed tf-idf embedder, and exact kNN.

Embeddings are normally produced elsewhere and ingested; the hashed tf-idf
embedder is an offline stand-in that makes the whole pipeline runnable and
reproducible without any model.
"""

from __future__ import annotations

import hashlib
import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Article

MAGIC = b"EMB1"
_TOKEN_RE = re.compile(r"[a-z0-9]+")


class EmbeddingError(Exception):
    pass


class AlignmentError(EmbeddingError):
    def __init__(self, missing: list[str], extra: list[str]):
        super().__init__(f"id mismatch: missing={missing} extra={extra}")
        self.missing = missing
        self.extra = extra


@dataclass
class EmbeddingMatrix:
    """Dense row-major float32 vectors aligned with corpus pmids."""

    row_ids: list[str]
    values: np.ndarray  # (n, d) float32
    warnings: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def row_index(self, pmid: str) -> int:
        if not hasattr(self, "_index"):
            self._index = {p: i for i, p in enumerate(self.row_ids)}
        return self._index[pmid]


def write_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Binary layout: magic, u32 n, u32 d, n*d little-endian f32, newline-joined pmids."""
    values = np.ascontiguousarray(matrix.values, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", matrix.n, matrix.d))
        fh.write(values.tobytes())
        fh.write("\n".join(matrix.row_ids).encode("utf-8"))
        fh.write(b"\n")


def _check_finite(values: np.ndarray) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.nonzero(bad.any(axis=1))[0][0])
        raise EmbeddingError(f"non-finite embedding entry at row {row}")


def _align(row_ids: list[str], values: np.ndarray, expected_ids: list[str]) -> EmbeddingMatrix:
    have = set(row_ids)
    want = set(expected_ids)
    if have != want:
        raise AlignmentError(missing=sorted(want - have), extra=sorted(have - want))
    index = {p: i for i, p in enumerate(row_ids)}
    order = [index[p] for p in expected_ids]
    return EmbeddingMatrix(row_ids=list(expected_ids), values=values[order])


def load_embeddings(path: str | Path, expected_ids: list[str]) -> EmbeddingMatrix:
    """Load a binary or TSV embedding file, reordering rows to expected_ids."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] == MAGIC:
        n, d = struct.unpack_from("<II", blob, 4)
        header = 4 + 8  # magic + two u32 counts
        id_offset = header + 4 * n * d
        if len(blob) < id_offset:
            raise EmbeddingError("truncated embedding file")
        values = (
            np.frombuffer(blob, dtype="<f4", count=n * d, offset=header).reshape(n, d).copy()
        )
        ids = blob[id_offset:].decode("utf-8").splitlines()
        if len(ids) != n:
            raise EmbeddingError(f"id section has {len(ids)} entries, expected {n}")
    else:
        try:
            lines = blob.decode("utf-8").splitlines()
        except UnicodeDecodeError:
            raise EmbeddingError(
                "unrecognized embedding file (no EMB1 magic, not UTF-8 text)"
            ) from None
        if not lines or not lines[0].startswith("pmid\t"):
            raise EmbeddingError("unrecognized embedding file (no EMB1 magic, no TSV header)")
        ids = []
        rows = []
        for line_no, line in enumerate(lines[1:], start=2):
            cells = line.split("\t")
            ids.append(cells[0])
            try:
                rows.append([float(c) for c in cells[1:]])
            except ValueError:
                raise EmbeddingError(f"line {line_no}: non-numeric vector entry") from None
        values = np.asarray(rows, dtype=np.float32)
    _check_finite(values)
    return _align(ids, values, expected_ids)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _token_hash(token: str, seed: int) -> int:
    key = seed.to_bytes(8, "little", signed=False)
    digest = hashlib.blake2b(token.encode("utf-8"), key=key, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def hashed_token_slot(token: str, d: int, seed: int) -> tuple[int, float]:
    """Deterministic (bucket, sign) for a token; shared with tests as the hashing contract."""
    h = _token_hash(token, seed)
    return h % d, 1.0 if (h >> 63) & 1 == 0 else -1.0


def embed_hashed_tfidf(articles: list[Article], d: int = 256, seed: int = 0) -> EmbeddingMatrix:
    """Seeded feature-hashing tf-idf over lowercase word unigrams, rows L2-normalized.

    A pure function of (texts, d, seed); articles with no extractable text get
    a zero row and a warning entry.
    """
    if d < 16:
        raise ValueError(f"dimension {d} < 16")
    token_lists = [tokenize(a.text()) for a in articles]
    n_docs = len(articles)
    df: dict[str, int] = {}
    for tokens in token_lists:
        for t in set(tokens):
            df[t] = df.get(t, 0) + 1

    values = np.zeros((n_docs, d), dtype=np.float64)
    warnings: list[str] = []
    for i, tokens in enumerate(token_lists):
        if not tokens:
            warnings.append(f"empty text for pmid {articles[i].pmid}: zero vector")
            continue
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        for t, tf in counts.items():
            idf = 1.0 + math.log((1.0 + n_docs) / (1.0 + df[t]))
            bucket, sign = hashed_token_slot(t, d, seed)
            values[i, bucket] += sign * tf * idf
        norm = math.sqrt(float(np.dot(values[i], values[i])))
        if norm > 0.0:
            values[i] /= norm
    return EmbeddingMatrix(
        row_ids=[a.pmid for a in articles],
        values=values.astype(np.float32),
        warnings=warnings,
    )


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; zero if either vector is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v)) / (nu * nv)


@dataclass
class KnnResult:
    neighbors: list[tuple[str, float]]  # (pmid, similarity), descending
    short: bool = False  # fewer candidates than requested

    def __iter__(self):
        return iter(self.neighbors)

    def __len__(self) -> int:
        return len(self.neighbors)


def _cosine_to_all(matrix: EmbeddingMatrix, query: np.ndarray) -> np.ndarray:
    values = matrix.values.astype(np.float64)
    norms = np.linalg.norm(values, axis=1)
    qnorm = float(np.linalg.norm(query))
    sims = values @ query
    denom = norms * qnorm
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(denom > 0.0, sims / denom, 0.0)
    return sims


def knn_exact(
    matrix: EmbeddingMatrix,
    query_row: int,
    k: int,
    exclude: set[str] | None = None,
) -> KnnResult:
    """Exact top-k rows by cosine, excluding self and the exclude set.

    Ties break by ascending pmid so results are reproducible.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    exclude = exclude or set()
    query = matrix.values[query_row].astype(np.float64)
    sims = _cosine_to_all(matrix, query)
    candidates = [
        (matrix.row_ids[i], float(sims[i]))
        for i in range(matrix.n)
        if i != query_row and matrix.row_ids[i] not in exclude
    ]
    candidates.sort(key=lambda t: (-t[1], t[0]))
    if k >= len(candidates):
        return KnnResult(neighbors=candidates, short=k > len(candidates))
    return KnnResult(neighbors=candidates[:k])


def knn_to_vector(
    matrix: EmbeddingMatrix,
    query: np.ndarray,
    k: int,
    exclude: set[str] | None = None,
    restrict: set[str] | None = None,
) -> KnnResult:
    """Exact top-k rows by cosine against an arbitrary query vector.

    ``restrict`` limits candidates to a pmid subset before ranking.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    exclude = exclude or set()
    sims = _cosine_to_all(matrix, np.asarray(query, dtype=np.float64))
    candidates = [
        (matrix.row_ids[i], float(sims[i]))
        for i in range(matrix.n)
        if matrix.row_ids[i] not in exclude
        and (restrict is None or matrix.row_ids[i] in restrict)
    ]
    candidates.sort(key=lambda t: (-t[1], t[0]))
    if k >= len(candidates):
        return KnnResult(neighbors=candidates, short=k > len(candidates))
    return KnnResult(neighbors=candidates[:k])


def hash_embed_text(text: str, d: int, seed: int) -> np.ndarray:
    """Embed free text into the same hashed space as embed_hashed_tfidf.

    Uses idf = 1 (a lone query has no document statistics); adequate for
    query-to-corpus cosine ranking.
    """
    if d < 16:
        raise ValueError(f"dimension {d} < 16")
    vec = np.zeros(d, dtype=np.float64)
    counts: dict[str, int] = {}
    for t in tokenize(text):
        counts[t] = counts.get(t, 0) + 1
    for t, tf in counts.items():
        bucket, sign = hashed_token_slot(t, d, seed)
        vec[bucket] += sign * tf
    norm = math.sqrt(float(np.dot(vec, vec)))
    if norm > 0.0:
        vec /= norm
    return vec
