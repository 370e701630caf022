"""A loaded map dataset: articles, layout, cluster tree, labels, edges,
embeddings, and the derived in-memory indexes (quadtree, keyword index,
binary point block).

Everything here is immutable after load; the server and the agents share
one instance per dataset.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bundling import BundledEdge
from .clustering import NOISE, ClusterNode, ClusterTree
from .corpus import Article, parse_tsv, write_tsv
from .embedding import EmbeddingMatrix, load_embeddings, tokenize
from .labeling import TopicLabel
from .spatial import Quadtree

POINTS_MAGIC = b"PTS1"

MAP_TSV = "map.tsv"
CLUSTERS_JSON = "clusters.json"
LABELS_JSON = "labels.json"
EDGES_JSON = "edges.json"
EMBEDDINGS_BIN = "embeddings.bin"
MANIFEST_JSON = "manifest.json"


class DatasetError(Exception):
    pass


def build_keyword_index(articles: list[Article]) -> dict[str, dict[str, int]]:
    """term -> {pmid -> term frequency} over title+abstract tokens."""
    index: dict[str, dict[str, int]] = {}
    for article in articles:
        for token in tokenize(article.text()):
            index.setdefault(token, {})
            index[token][article.pmid] = index[token].get(article.pmid, 0) + 1
    return index


def _tree_from_jsonable(doc: dict) -> ClusterTree:
    nodes = [
        ClusterNode(
            cluster_id=int(n["cluster_id"]),
            level=int(n["level"]),
            members=list(n["member_pmids"]),
            parent_id=None if n["parent_id"] is None else int(n["parent_id"]),
            stability=float(n["stability"]),
            label=n.get("label", ""),
        )
        for n in doc["nodes"]
    ]
    return ClusterTree(nodes=nodes, n_levels=int(doc["n_levels"]))


def _labels_from_jsonable(doc: dict) -> dict[int, TopicLabel]:
    out: dict[int, TopicLabel] = {}
    for entry in doc["labels"]:
        cid = int(entry["cluster_id"])
        out[cid] = TopicLabel(
            cluster_id=cid,
            terms=[(t["term"], float(t["score"])) for t in entry["terms"]],
            label=entry["label"],
        )
    return out


def _edges_from_jsonable(doc: dict) -> list[BundledEdge]:
    return [
        BundledEdge(
            source=e["source"],
            target=e["target"],
            weight=float(e["weight"]),
            points=np.array(e["points"], dtype=np.float64),
        )
        for e in doc["edges"]
    ]


@dataclass
class MapDataset:
    dataset_id: str
    articles: list[Article]
    tree: ClusterTree | None = None
    labels: dict[int, TopicLabel] | None = None
    edges: list[BundledEdge] | None = None
    embeddings: EmbeddingMatrix | None = None
    manifest: dict = field(default_factory=dict)

    by_pmid: dict[str, Article] = field(init=False)
    quadtree: Quadtree = field(init=False)
    keyword_index: dict[str, dict[str, int]] = field(init=False)
    assignments: dict[str, int] = field(init=False)  # pmid -> finest cluster id
    points_block: bytes = field(init=False)

    def __post_init__(self) -> None:
        if not self.articles:
            raise DatasetError("dataset has no articles")
        self.by_pmid = {a.pmid: a for a in self.articles}
        missing = [a.pmid for a in self.articles if a.x is None or a.y is None]
        if missing:
            raise DatasetError(f"articles missing coordinates: {missing[:5]}")
        self.quadtree = Quadtree([(a.pmid, a.x, a.y) for a in self.articles])
        self.keyword_index = build_keyword_index(self.articles)
        self.assignments = dict(self.tree.assignments) if self.tree else {}
        if self.tree and not self.assignments:
            self.assignments = {
                pmid: NOISE for pmid in self.by_pmid
            }
            for node in self.tree.level_nodes(0):
                for pmid in node.members:
                    self.assignments[pmid] = node.cluster_id
        self.points_block = self._encode_points()

    @property
    def n(self) -> int:
        return len(self.articles)

    def cluster_ids(self) -> set[int]:
        return {node.cluster_id for node in self.tree.nodes} if self.tree else set()

    def points_tsv(self) -> bytes:
        if not hasattr(self, "_tsv_cache"):
            self._tsv_cache = write_tsv(self.articles).encode("utf-8")
        return self._tsv_cache

    def cluster_of(self, pmid: str) -> int:
        return self.assignments.get(pmid, NOISE)

    def _encode_points(self) -> bytes:
        n = len(self.articles)
        xs = np.array([a.x for a in self.articles], dtype="<f4")
        ys = np.array([a.y for a in self.articles], dtype="<f4")
        years = np.array(
            [a.year if a.year is not None else 0 for a in self.articles], dtype="<u2"
        )
        clusters = np.array(
            [self.cluster_of(a.pmid) for a in self.articles], dtype="<i4"
        )
        sizes = np.array([a.size for a in self.articles], dtype="<f4")
        return b"".join(
            [
                POINTS_MAGIC,
                struct.pack("<I", n),
                xs.tobytes(),
                ys.tobytes(),
                years.tobytes(),
                clusters.tobytes(),
                sizes.tobytes(),
            ]
        )

    @classmethod
    def load(cls, dataset_id: str, directory: str | Path) -> "MapDataset":
        directory = Path(directory)
        tsv = directory / MAP_TSV
        if not tsv.exists():
            raise DatasetError(f"{tsv} not found")
        with tsv.open("r", encoding="utf-8") as fh:
            articles = parse_tsv(fh)

        def read_json(name: str):
            path = directory / name
            if not path.exists():
                return None
            return json.loads(path.read_text(encoding="utf-8"))

        tree_doc = read_json(CLUSTERS_JSON)
        labels_doc = read_json(LABELS_JSON)
        edges_doc = read_json(EDGES_JSON)
        manifest = read_json(MANIFEST_JSON) or {}

        embeddings = None
        emb_path = directory / EMBEDDINGS_BIN
        if emb_path.exists():
            embeddings = load_embeddings(emb_path, expected_ids=[a.pmid for a in articles])

        tree = _tree_from_jsonable(tree_doc) if tree_doc else None
        if tree is not None:
            tree.assignments = {a.pmid: NOISE for a in articles}
            for node in tree.level_nodes(0):
                for pmid in node.members:
                    tree.assignments[pmid] = node.cluster_id
        return cls(
            dataset_id=dataset_id,
            articles=articles,
            tree=tree,
            labels=_labels_from_jsonable(labels_doc) if labels_doc else None,
            edges=_edges_from_jsonable(edges_doc) if edges_doc else None,
            embeddings=embeddings,
            manifest=manifest,
        )
