"""HTTP service over one or more map-ready dataset directories.

The registry is built once at startup and never mutated; every endpoint is
a pure read, so identical requests return identical bodies (the agent
gateway included, as long as the model client is the deterministic stub).
"""

from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import JSONResponse

from .agents import (
    AgentError,
    ContextValidationError,
    ModeUnavailableError,
    answer_query,
    parse_context,
    response_bytes,
)
from .dataset import MAP_TSV, DatasetError, MapDataset
from .labeling import labels_to_json
from .model_clients import StubModelClient

log = logging.getLogger("litmap.server")

PAGE_SIZE = 100


class ServerError(Exception):
    pass


def discover_datasets(data_dir: str | Path) -> tuple[dict[str, MapDataset], list[tuple[str, str]]]:
    """Load every dataset under data_dir; corrupt ones are skipped, not fatal."""
    root = Path(data_dir)
    if not root.is_dir():
        raise ServerError(f"data directory {root} does not exist")
    candidates: list[tuple[str, Path]] = []
    if (root / MAP_TSV).exists():
        candidates.append((root.name or "dataset", root))
    else:
        for child in sorted(root.iterdir()):
            if child.is_dir() and (child / MAP_TSV).exists():
                candidates.append((child.name, child))
    if not candidates:
        raise ServerError(f"no dataset (directory containing {MAP_TSV}) found under {root}")
    registry: dict[str, MapDataset] = {}
    skipped: list[tuple[str, str]] = []
    for dataset_id, directory in candidates:
        try:
            registry[dataset_id] = MapDataset.load(dataset_id, directory)
        except Exception as exc:  # corrupt artifact: degrade, don't die
            skipped.append((dataset_id, str(exc)))
            log.warning("skipping dataset %s: %s", dataset_id, exc)
    return registry, skipped


def article_jsonable(article) -> dict:
    return {
        "pmid": article.pmid,
        "date": article.date,
        "journal": article.journal,
        "title": article.title,
        "abstract": article.abstract,
        "mesh_terms": article.mesh_terms,
        "x": article.x,
        "y": article.y,
        "citation_count": article.citation_count,
        "size": article.size,
        "color": article.color,
    }


def build_app(
    data_dir: str | Path,
    model_client=None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    registry, skipped = discover_datasets(data_dir)
    client = model_client if model_client is not None else StubModelClient()
    app = FastAPI(title="literature map server")
    app.state.registry = registry
    app.state.skipped = skipped
    app.state.model_client = client

    def dataset_or_404(dataset_id: str) -> MapDataset:
        ds = registry.get(dataset_id)
        if ds is None:
            raise HTTPException(status_code=404, detail=f"unknown dataset {dataset_id!r}")
        return ds

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "datasets": len(registry)}

    @app.get("/api/datasets")
    def datasets() -> list[dict]:
        out = []
        for dataset_id in sorted(registry):
            ds = registry[dataset_id]
            out.append(
                {
                    "id": dataset_id,
                    "articles": ds.n,
                    "clusters": len(ds.tree.nodes) if ds.tree else 0,
                    "has_labels": ds.labels is not None,
                    "has_edges": ds.edges is not None,
                    "has_embeddings": ds.embeddings is not None,
                }
            )
        return out

    @app.get("/api/datasets/{dataset_id}/points")
    def points(dataset_id: str, format: str = "tsv") -> Response:
        ds = dataset_or_404(dataset_id)
        if format == "binary":
            return Response(content=ds.points_block, media_type="application/octet-stream")
        if format == "tsv":
            return Response(content=ds.points_tsv(), media_type="text/tab-separated-values")
        raise HTTPException(status_code=400, detail=f"unknown format {format!r}")

    @app.get("/api/datasets/{dataset_id}/clusters")
    def clusters(dataset_id: str) -> dict:
        ds = dataset_or_404(dataset_id)
        return ds.tree.to_jsonable() if ds.tree else {"n_levels": 0, "nodes": []}

    @app.get("/api/datasets/{dataset_id}/labels")
    def labels(dataset_id: str) -> dict:
        ds = dataset_or_404(dataset_id)
        if ds.labels is None:
            return {"stopwords_version": None, "labels": []}
        return labels_to_json(ds.labels)

    @app.get("/api/datasets/{dataset_id}/edges")
    def edges(dataset_id: str) -> dict:
        ds = dataset_or_404(dataset_id)
        if ds.edges is None:
            return {"edges": []}
        return {"edges": [e.to_jsonable() for e in ds.edges]}

    @app.get("/api/datasets/{dataset_id}/articles")
    def articles(dataset_id: str, pmids: str = "", page: int = 1) -> dict:
        ds = dataset_or_404(dataset_id)
        if page < 1:
            raise HTTPException(status_code=400, detail="page must be >= 1")
        if pmids.strip():
            wanted = [p.strip() for p in pmids.split(",") if p.strip()]
            found = [ds.by_pmid[p] for p in wanted if p in ds.by_pmid]
            missing = sorted(p for p in wanted if p not in ds.by_pmid)
        else:
            found = ds.articles
            missing = []
        start = (page - 1) * PAGE_SIZE
        subset = found[start : start + PAGE_SIZE]
        return {
            "articles": [article_jsonable(a) for a in subset],
            "total": len(found),
            "page": page,
            "page_size": PAGE_SIZE,
            "missing": missing,
        }

    @app.post("/api/datasets/{dataset_id}/selection/polygon")
    async def polygon_select(dataset_id: str, request: Request) -> dict:
        ds = dataset_or_404(dataset_id)
        body = await request.json()
        vertices = body.get("vertices")
        if not isinstance(vertices, list) or len(vertices) < 3:
            raise HTTPException(status_code=400, detail="polygon needs at least 3 vertices")
        try:
            verts = [(float(v[0]), float(v[1])) for v in vertices]
        except (TypeError, ValueError, IndexError):
            raise HTTPException(status_code=400, detail="vertices must be [x, y] pairs")
        hits = sorted(ds.quadtree.query_polygon(verts))
        return {"pmids": hits, "count": len(hits)}

    @app.post("/api/agent/query")
    async def agent_query(request: Request) -> Response:
        body = await request.json()
        payload = parse_context(body)
        ds = dataset_or_404(payload.dataset_id)
        try:
            result = answer_query(ds, payload, model_client=client)
        except ContextValidationError as exc:
            return JSONResponse(status_code=422, content={"errors": exc.errors})
        except ModeUnavailableError as exc:
            return JSONResponse(status_code=503, content={"errors": [str(exc)]})
        except AgentError as exc:
            return JSONResponse(status_code=422, content={"errors": [str(exc)]})
        log.info(
            "agent query dataset=%s trace=%s",
            payload.dataset_id,
            [t["agent"] for t in result.agent_trace],
        )
        return Response(content=response_bytes(result), media_type="application/json")

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
