"""Offline pipeline: input corpus TSV to a map-ready artifact directory.

Stages run in a fixed order (ingest, embed, layout, cluster, label, bundle)
and each persists its intermediates, so the single-stage entry points can
resume from whatever an earlier invocation left on disk.  The manifest is
written last; a failed run leaves a failed_stage.json marker and no
manifest.  Artifacts carry no timestamps — rerunning with the same input,
config and seed reproduces every byte.
"""

from __future__ import annotations

import json
from pathlib import Path

from .bundling import BundleConfig, bundle_edges, derive_cocitation_edges
from .clustering import build_hierarchy
from .config import PipelineConfig
from .corpus import Article, parse_tsv, write_tsv
from .dataset import (
    CLUSTERS_JSON,
    EDGES_JSON,
    EMBEDDINGS_BIN,
    LABELS_JSON,
    MANIFEST_JSON,
    MAP_TSV,
    _tree_from_jsonable,
)
from .embedding import EmbeddingMatrix, embed_hashed_tfidf, load_embeddings, write_embeddings
from .labeling import label_tree, labels_to_json
from .layout import (
    LayoutConfig,
    TsneConfig,
    build_knn_graph,
    fit_largevis,
    fit_tsne_exact,
)

LAYOUT_REPORT_JSON = "layout_report.json"
FAILED_MARKER = "failed_stage.json"

STAGES = ("ingest", "embed", "layout", "cluster", "label", "bundle", "persist")
SKIPPABLE = {"label": "label", "labeling": "label", "bundle": "bundle", "bundling": "bundle"}


class PipelineError(Exception):
    pass


class MissingArtifactError(PipelineError):
    """A single-stage run lacks a prerequisite artifact."""


class PipelineStageError(PipelineError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _read_articles(path: Path) -> list[Article]:
    with path.open("r", encoding="utf-8") as fh:
        return parse_tsv(fh)


def _write_map(articles: list[Article], out_dir: Path) -> None:
    (out_dir / MAP_TSV).write_bytes(write_tsv(articles).encode("utf-8"))


def normalize_skip(names: list[str]) -> set[str]:
    out: set[str] = set()
    for name in names:
        key = name.strip().lower()
        if not key:
            continue
        if key not in SKIPPABLE:
            raise PipelineError(
                f"cannot skip {name!r}; skippable stages: label, bundle"
            )
        out.add(SKIPPABLE[key])
    return out


# ---------------------------------------------------------------------------
# Stage bodies
# ---------------------------------------------------------------------------


def ingest_stage(input_path: str | Path) -> list[Article]:
    articles = _read_articles(Path(input_path))
    if not articles:
        raise PipelineError("input corpus is empty")
    articles.sort(key=lambda a: a.pmid)
    return articles


def embed_stage(
    articles: list[Article],
    config: PipelineConfig,
    out_dir: Path,
    embeddings_path: str | Path | None = None,
    test_embedder: bool = False,
) -> tuple[EmbeddingMatrix, dict]:
    if test_embedder:
        matrix = embed_hashed_tfidf(articles, d=config.embedding_dim, seed=config.seed)
        meta = {"method": "hashed_tfidf", "d": config.embedding_dim, "seed": config.seed}
    elif embeddings_path is not None:
        matrix = load_embeddings(embeddings_path, expected_ids=[a.pmid for a in articles])
        meta = {"method": "external", "d": matrix.d}
    else:
        raise MissingArtifactError(
            "no embeddings source: pass an embeddings file or enable the test embedder"
        )
    write_embeddings(matrix, out_dir / EMBEDDINGS_BIN)
    return matrix, meta


def layout_stage_body(
    articles: list[Article], matrix: EmbeddingMatrix, config: PipelineConfig, out_dir: Path
) -> None:
    n = len(articles)
    if config.layout_method == "largevis":
        k = min(config.layout_knn_k, n - 1)
        perplexity = min(config.layout_perplexity, float(k))
        graph = build_knn_graph(matrix, k=k, perplexity=perplexity)
        layout = fit_largevis(
            graph,
            seed=config.seed,
            config=LayoutConfig(
                negatives=config.layout_negatives,
                gamma=config.layout_gamma,
                rho0=config.layout_rho0,
                n_updates=config.layout_updates or None,
            ),
        )
    else:
        perplexity = min(config.tsne_perplexity, (n - 1) / 3.0)
        layout = fit_tsne_exact(
            matrix,
            perplexity=perplexity,
            seed=config.seed,
            config=TsneConfig(iters=config.tsne_iters),
        )
    for article, (x, y) in zip(articles, layout.coordinates):
        article.x = float(x)
        article.y = float(y)
    report = layout.report()
    report["objective_history"] = [[it, kl] for it, kl in layout.objective_history]
    write_json(out_dir / LAYOUT_REPORT_JSON, report)
    _write_map(articles, out_dir)


def cluster_stage_body(out_dir: Path, config: PipelineConfig) -> None:
    map_path = out_dir / MAP_TSV
    if not map_path.exists():
        raise MissingArtifactError(f"{MAP_TSV} not found in {out_dir}; run layout first")
    articles = _read_articles(map_path)
    if any(a.x is None or a.y is None for a in articles):
        raise MissingArtifactError(f"{MAP_TSV} lacks coordinates; run layout first")
    coords = [(a.x, a.y) for a in articles]
    pmids = [a.pmid for a in articles]
    n = len(articles)
    schedule = [
        (max(5, round(n * q)), config.cluster_min_samples) for q in config.cluster_quantiles
    ]
    tree = build_hierarchy(coords, pmids, schedule=schedule, theta=config.cluster_theta)
    write_json(out_dir / CLUSTERS_JSON, tree.to_jsonable())
    for article in articles:
        article.color = str(tree.assignments.get(article.pmid, -1))
    _write_map(articles, out_dir)


def label_stage_body(out_dir: Path, config: PipelineConfig) -> None:
    clusters_path = out_dir / CLUSTERS_JSON
    map_path = out_dir / MAP_TSV
    if not clusters_path.exists():
        raise MissingArtifactError(f"{CLUSTERS_JSON} not found in {out_dir}; run cluster first")
    if not map_path.exists():
        raise MissingArtifactError(f"{MAP_TSV} not found in {out_dir}")
    tree = _tree_from_jsonable(json.loads(clusters_path.read_text(encoding="utf-8")))
    articles = _read_articles(map_path)
    labels = label_tree(tree, articles, k=config.label_k)
    write_json(out_dir / LABELS_JSON, labels_to_json(labels))
    write_json(out_dir / CLUSTERS_JSON, tree.to_jsonable())  # labels now filled


def bundle_stage_body(out_dir: Path, config: PipelineConfig, citations_path: str | Path) -> None:
    map_path = out_dir / MAP_TSV
    if not map_path.exists():
        raise MissingArtifactError(f"{MAP_TSV} not found in {out_dir}; run layout first")
    articles = _read_articles(map_path)
    if any(a.x is None or a.y is None for a in articles):
        raise MissingArtifactError(f"{MAP_TSV} lacks coordinates; run layout first")
    citing_to_cited = json.loads(Path(citations_path).read_text(encoding="utf-8"))
    corpus = {a.pmid for a in articles}
    raw = derive_cocitation_edges(citing_to_cited, corpus, min_weight=config.cocite_min_weight)
    coords = {a.pmid: (a.x, a.y) for a in articles}
    bundled = bundle_edges(
        raw,
        coords,
        BundleConfig(
            grid_size=config.bundle_grid,
            h0_frac=config.bundle_h0_frac,
            decay=config.bundle_decay,
            iterations=config.bundle_iterations,
            step=config.bundle_step,
            smoothing=config.bundle_smoothing,
            max_segment_frac=config.bundle_max_segment_frac,
        ),
    )
    write_json(out_dir / EDGES_JSON, {"edges": [e.to_jsonable() for e in bundled]})


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------


def run_pipeline(
    input_path: str | Path,
    out_dir: str | Path,
    config: PipelineConfig,
    embeddings_path: str | Path | None = None,
    test_embedder: bool = False,
    citations_path: str | Path | None = None,
    skip: set[str] | None = None,
) -> dict:
    """Run every stage and return the manifest (also written to out_dir)."""
    config.validate()
    skip = skip or set()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for stale in (MANIFEST_JSON, FAILED_MARKER):
        path = out / stale
        if path.exists():
            path.unlink()

    executed: list[str] = []
    state: dict = {}

    def run(stage: str, fn) -> None:
        try:
            fn()
        except Exception as exc:
            write_json(out / FAILED_MARKER, {"stage": stage, "error": str(exc)})
            raise PipelineStageError(stage, exc) from exc
        executed.append(stage)

    run("ingest", lambda: state.update(articles=ingest_stage(input_path)))
    run(
        "embed",
        lambda: state.update(
            embed=embed_stage(
                state["articles"], config, out, embeddings_path, test_embedder
            )
        ),
    )
    run(
        "layout",
        lambda: layout_stage_body(state["articles"], state["embed"][0], config, out),
    )
    run("cluster", lambda: cluster_stage_body(out, config))
    if "label" not in skip:
        run("label", lambda: label_stage_body(out, config))
    if "bundle" not in skip and citations_path is not None:
        run("bundle", lambda: bundle_stage_body(out, config, citations_path))

    def persist() -> None:
        articles = _read_articles(out / MAP_TSV)
        clusters_doc = json.loads((out / CLUSTERS_JSON).read_text(encoding="utf-8"))
        artifacts = {"map": MAP_TSV, "embeddings": EMBEDDINGS_BIN, "layout_report": LAYOUT_REPORT_JSON, "clusters": CLUSTERS_JSON}
        if (out / LABELS_JSON).exists() and "label" in executed:
            artifacts["labels"] = LABELS_JSON
        n_edges = 0
        if (out / EDGES_JSON).exists() and "bundle" in executed:
            artifacts["edges"] = EDGES_JSON
            n_edges = len(
                json.loads((out / EDGES_JSON).read_text(encoding="utf-8"))["edges"]
            )
        manifest = {
            "config": config.to_flat_dict(),
            "config_digest": config.digest(),
            "embedding": state["embed"][1],
            "artifacts": artifacts,
            "counts": {
                "articles": len(articles),
                "clusters": len(clusters_doc["nodes"]),
                "edges": n_edges,
            },
            "stages": executed + ["persist"],
        }
        write_json(out / MANIFEST_JSON, manifest)
        state["manifest"] = manifest

    run("persist", persist)
    return state["manifest"]
