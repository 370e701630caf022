"""Selection-grounded question answering over a loaded map dataset.

The wire contract is two JSON documents: a ContextPayload carrying the
user's selection and question, and an AgentResponse carrying answer text,
UI actions, provenance, and the trace of specialist invocations.  Routing
is a deterministic keyword baseline; a model client may override it.  All
responses built with the stub client are byte-stable.
"""

from __future__ import annotations

import json
import re
import statistics
from dataclasses import dataclass, field

import numpy as np

from .clustering import NOISE
from .dataset import MapDataset
from .embedding import hash_embed_text, knn_to_vector
from .model_clients import (
    DEFAULT_EVIDENCE_SCHEMA,
    ModelClient,
    ModelClientError,
    StubModelClient,
)

SPECIALISTS = ("scholar", "evidence", "analytical", "discovery")

ANALYTICAL_KEYWORDS = ("trend", "count", "how many", "compare", "distribution", "statistics")
DISCOVERY_KEYWORDS = ("similar", "related", "nearby", "gap", "underexplored", "hypothesis")
EVIDENCE_KEYWORDS = ("extract", "table", "population", "intervention", "outcome", "study design")

CITATION_RE = re.compile(r"\[([^\[\]\s]+)\]")
HISTOGRAM_BINS = ((0, 1), (1, 5), (5, 20), (20, 100), (100, None))


class AgentError(Exception):
    pass


class ContextValidationError(AgentError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


class EmptySelectionError(AgentError):
    pass


class ModeUnavailableError(AgentError):
    pass


class ActionValidationError(AgentError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


# ---------------------------------------------------------------------------
# Wire types
# ---------------------------------------------------------------------------


@dataclass
class Selection:
    pmids: list[str] = field(default_factory=list)
    polygon: list[tuple[float, float]] | None = None
    cluster_ids: list[int] = field(default_factory=list)
    year_range: tuple[int, int] | None = None

    def is_empty(self) -> bool:
        return (
            not self.pmids
            and self.polygon is None
            and not self.cluster_ids
            and self.year_range is None
        )


@dataclass
class ContextPayload:
    dataset_id: str
    selection: Selection = field(default_factory=Selection)
    query_text: str = ""
    interaction_state: dict = field(default_factory=dict)


@dataclass
class UIAction:
    action_type: str
    parameters: dict

    def to_jsonable(self) -> dict:
        return {"action_type": self.action_type, "parameters": self.parameters}


@dataclass
class AgentResponse:
    text: str
    actions: list[UIAction] = field(default_factory=list)
    provenance: list[dict] = field(default_factory=list)
    agent_trace: list[dict] = field(default_factory=list)
    data: dict | None = None

    def to_jsonable(self) -> dict:
        return {
            "text": self.text,
            "actions": [a.to_jsonable() for a in self.actions],
            "provenance": self.provenance,
            "agent_trace": self.agent_trace,
            "data": self.data,
        }


def response_bytes(response: AgentResponse) -> bytes:
    return json.dumps(
        response.to_jsonable(), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def parse_context(raw: dict) -> ContextPayload:
    sel = raw.get("selection") or {}
    polygon = sel.get("polygon")
    if polygon is not None:
        polygon = [(float(p[0]), float(p[1])) for p in polygon]
    year_range = sel.get("year_range")
    if year_range is not None:
        year_range = tuple(year_range)
    return ContextPayload(
        dataset_id=str(raw.get("dataset_id", "")),
        selection=Selection(
            pmids=[str(p) for p in sel.get("pmids", [])],
            polygon=polygon,
            cluster_ids=[int(c) for c in sel.get("cluster_ids", [])],
            year_range=year_range,
        ),
        query_text=str(raw.get("query_text", "")),
        interaction_state=raw.get("interaction_state") or {},
    )


# ---------------------------------------------------------------------------
# Context validation
# ---------------------------------------------------------------------------


@dataclass
class ValidatedContext:
    payload: ContextPayload
    effective: list[str] | None  # sorted pmids; None = no constraints (whole dataset)

    @property
    def empty(self) -> bool:
        return self.effective is not None and not self.effective

    def effective_or_all(self, dataset: MapDataset) -> list[str]:
        if self.effective is None:
            return sorted(dataset.by_pmid)
        return self.effective


def validate_context(payload: ContextPayload, dataset: MapDataset) -> ValidatedContext:
    """Check the payload invariants and resolve it to an effective pmid set.

    Explicit pmids and polygon hits merge into one point-level selection;
    cluster and year constraints then intersect with it.  An intersection
    that comes out empty is a signal, not an error.
    """
    errors: list[str] = []
    sel = payload.selection

    unknown = sorted(p for p in sel.pmids if p not in dataset.by_pmid)
    if unknown:
        errors.append(f"unknown pmids: {', '.join(unknown)}")

    known_clusters = dataset.cluster_ids()
    bad_clusters = sorted(c for c in sel.cluster_ids if c not in known_clusters)
    if bad_clusters:
        errors.append(f"unknown cluster ids: {', '.join(map(str, bad_clusters))}")

    if sel.polygon is not None and len(sel.polygon) < 3:
        errors.append("polygon needs at least 3 vertices")

    if sel.year_range is not None:
        if len(sel.year_range) != 2:
            errors.append("year_range must be [min, max]")
        elif sel.year_range[0] > sel.year_range[1]:
            errors.append(f"year_range min {sel.year_range[0]} > max {sel.year_range[1]}")

    if not payload.query_text.strip() and sel.is_empty():
        errors.append("at least one of query_text or selection is required")

    if errors:
        raise ContextValidationError(errors)

    constraints: list[set[str]] = []
    point_level: set[str] = set(sel.pmids)
    if sel.polygon is not None:
        hits = dataset.quadtree.query_polygon(sel.polygon)
        point_level |= hits
        sel.pmids = sorted(set(sel.pmids) | hits)  # polygon resolved into the payload
    if sel.pmids or sel.polygon is not None:
        constraints.append(point_level)
    if sel.cluster_ids:
        members: set[str] = set()
        by_id = dataset.tree.by_id() if dataset.tree else {}
        for cid in sel.cluster_ids:
            members |= set(by_id[cid].members)
        constraints.append(members)
    if sel.year_range is not None:
        lo, hi = sel.year_range
        constraints.append(
            {a.pmid for a in dataset.articles if a.year is not None and lo <= a.year <= hi}
        )

    if not constraints:
        return ValidatedContext(payload=payload, effective=None)
    effective = set.intersection(*constraints)
    return ValidatedContext(payload=payload, effective=sorted(effective))


# ---------------------------------------------------------------------------
# Routing
# ---------------------------------------------------------------------------


def _matches_any(query: str, keywords: tuple[str, ...]) -> bool:
    for kw in keywords:
        if re.search(rf"\b{re.escape(kw)}\b", query):
            return True
    return False


def route_intent(
    query_text: str,
    selection: Selection | None = None,
    model_client: ModelClient | None = None,
) -> str:
    """Deterministic keyword routing; a model client may override it."""
    if not query_text.strip():
        raise AgentError("query_text must be non-empty for routing")
    if model_client is not None:
        hint = model_client.route_hint(query_text)
        if hint in SPECIALISTS:
            return hint
    q = query_text.lower()
    if _matches_any(q, ANALYTICAL_KEYWORDS):
        return "analytical"
    if _matches_any(q, DISCOVERY_KEYWORDS):
        return "discovery"
    if _matches_any(q, EVIDENCE_KEYWORDS):
        return "evidence"
    return "scholar"


# ---------------------------------------------------------------------------
# Retrieval
# ---------------------------------------------------------------------------


def keyword_search(
    index: dict[str, dict[str, int]],
    terms: list[str],
    restriction: set[str] | None = None,
) -> list[str]:
    """Rank pmids by summed term frequency; ties ascend by pmid."""
    scores: dict[str, int] = {}
    for term in terms:
        posting = index.get(term.lower())
        if not posting:
            continue
        for pmid, tf in posting.items():
            if restriction is not None and pmid not in restriction:
                continue
            scores[pmid] = scores.get(pmid, 0) + tf
    return [p for p, _ in sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))]


# ---------------------------------------------------------------------------
# Specialists
# ---------------------------------------------------------------------------


def _selected_articles(dataset: MapDataset, pmids: list[str]):
    return [dataset.by_pmid[p] for p in sorted(pmids)]


def run_analytical(
    dataset: MapDataset,
    selection_pmids: list[str],
    request: str,
    params: dict | None = None,
) -> AgentResponse:
    params = params or {}
    if request == "trend_by_year":
        arts = _selected_articles(dataset, selection_pmids)
        if not arts:
            raise EmptySelectionError("trend_by_year needs a non-empty selection")
        years = sorted(a.year for a in arts if a.year is not None)
        if not years:
            rows: list[list[int]] = []
            text = "No publication dates available in the selection."
        else:
            counts: dict[int, int] = {}
            for y in years:
                counts[y] = counts.get(y, 0) + 1
            rows = [[y, counts.get(y, 0)] for y in range(years[0], years[-1] + 1)]
            text = (
                f"Publication trend {years[0]}-{years[-1]}: "
                f"{len(years)} dated articles across {len(rows)} years."
            )
        data = {"request": request, "rows": rows}
    elif request == "citation_histogram":
        arts = _selected_articles(dataset, selection_pmids)
        if not arts:
            raise EmptySelectionError("citation_histogram needs a non-empty selection")
        rows = []
        for lo, hi in HISTOGRAM_BINS:
            label = f"[{lo},{hi})" if hi is not None else f"[{lo},inf)"
            count = sum(
                1
                for a in arts
                if a.citation_count >= lo and (hi is None or a.citation_count < hi)
            )
            rows.append([label, count])
        text = f"Citation distribution over {len(arts)} articles."
        data = {"request": request, "rows": rows}
    elif request == "cluster_compare":
        if "cluster_a" not in params or "cluster_b" not in params:
            raise AgentError("cluster_compare needs cluster_a and cluster_b")
        if dataset.tree is None:
            raise AgentError("dataset has no cluster tree")
        by_id = dataset.tree.by_id()
        entries = []
        for key in ("cluster_a", "cluster_b"):
            cid = int(params[key])
            if cid not in by_id:
                raise AgentError(f"unknown cluster id {cid}")
            node = by_id[cid]
            years = [
                dataset.by_pmid[p].year
                for p in node.members
                if p in dataset.by_pmid and dataset.by_pmid[p].year is not None
            ]
            topic = dataset.labels.get(cid) if dataset.labels else None
            entries.append(
                {
                    "cluster_id": cid,
                    "size": len(node.members),
                    "year_median": float(statistics.median(years)) if years else None,
                    "top_terms": [t for t, _ in topic.terms[:3]] if topic else [],
                }
            )
        text = (
            f"Cluster {entries[0]['cluster_id']} ({entries[0]['size']} articles) vs "
            f"cluster {entries[1]['cluster_id']} ({entries[1]['size']} articles)."
        )
        data = {"request": request, "clusters": entries}
    elif request == "journal_top":
        arts = _selected_articles(dataset, selection_pmids)
        if not arts:
            raise EmptySelectionError("journal_top needs a non-empty selection")
        counts: dict[str, int] = {}
        for a in arts:
            if a.journal:
                counts[a.journal] = counts.get(a.journal, 0) + 1
        rows = [
            [j, c] for j, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
        ]
        text = f"Top journals across {len(arts)} articles."
        data = {"request": request, "rows": rows}
    else:
        raise AgentError(f"unknown analytical request {request!r}")

    return AgentResponse(
        text=text,
        data=data,
        agent_trace=[
            {"agent": "analytical", "tool": request, "detail": f"{len(selection_pmids)} selected"}
        ],
    )


def run_discovery(dataset: MapDataset, selection_pmids: list[str], k: int = 10) -> AgentResponse:
    if not selection_pmids:
        raise EmptySelectionError("discovery needs a non-empty selection")
    if dataset.embeddings is None:
        raise AgentError("dataset has no embeddings; discovery unavailable")
    selection = sorted(set(selection_pmids))
    sel_set = set(selection)

    matrix = dataset.embeddings
    rows = [matrix.row_index(p) for p in selection]
    centroid = matrix.values[rows].astype(np.float64).mean(axis=0)

    if len(sel_set) >= matrix.n:
        neighbors = []
        notice = "Selection spans the entire dataset; no external neighbors exist."
    else:
        neighbors = list(knn_to_vector(matrix, centroid, k, exclude=sel_set))
        notice = ""

    cluster_counts: dict[int, int] = {}
    for pmid, _sim in neighbors:
        cid = dataset.cluster_of(pmid)
        if cid != NOISE:
            cluster_counts[cid] = cluster_counts.get(cid, 0) + 1
    adjacent = sorted(cluster_counts.items(), key=lambda kv: (-kv[1], kv[0]))

    # gap scan: empty cells of a 16x16 occupancy grid over the selection's
    # bounding box scaled 2x about its centre
    sel_arts = [dataset.by_pmid[p] for p in selection]
    sx = np.array([a.x for a in sel_arts])
    sy = np.array([a.y for a in sel_arts])
    cx, cy = float(sx.mean()), float(sy.mean())
    all_x = np.array([a.x for a in dataset.articles])
    all_y = np.array([a.y for a in dataset.articles])
    dataset_diag = float(
        np.hypot(all_x.max() - all_x.min(), all_y.max() - all_y.min())
    )
    half_w = max(float(sx.max() - sx.min()), dataset_diag * 0.01, 1e-9)
    half_h = max(float(sy.max() - sy.min()), dataset_diag * 0.01, 1e-9)
    x0, x1 = cx - half_w, cx + half_w
    y0, y1 = cy - half_h, cy + half_h
    grid = 16
    occupied = np.zeros((grid, grid), dtype=bool)
    inside = (all_x >= x0) & (all_x <= x1) & (all_y >= y0) & (all_y <= y1)
    col = np.clip(((all_x[inside] - x0) / (x1 - x0) * grid).astype(int), 0, grid - 1)
    row = np.clip(((all_y[inside] - y0) / (y1 - y0) * grid).astype(int), 0, grid - 1)
    occupied[row, col] = True
    empties = []
    for r in range(grid):
        for c in range(grid):
            if not occupied[r, c]:
                gx = x0 + (c + 0.5) / grid * (x1 - x0)
                gy = y0 + (r + 0.5) / grid * (y1 - y0)
                d2 = (gx - cx) ** 2 + (gy - cy) ** 2
                empties.append((d2, r, c, gx, gy))
    empties.sort()
    gap_cells = [{"x": gx, "y": gy} for _d2, _r, _c, gx, gy in empties[:5]]

    lines = [f"- {dataset.by_pmid[p].title} [{p}]" for p, _ in neighbors]
    text = notice or (
        f"{len(neighbors)} nearest articles to the selection centroid:\n" + "\n".join(lines)
    )
    actions = []
    if adjacent:
        actions.append(
            UIAction(
                action_type="highlight_clusters",
                parameters={"cluster_ids": [cid for cid, _ in adjacent[:3]]},
            )
        )
    return AgentResponse(
        text=text,
        actions=actions,
        provenance=[
            # neighbors live outside the selection by construction, so they
            # carry their own source type rather than "in_collection"
            {"pmid": p, "snippet": dataset.by_pmid[p].title, "source_type": "neighbor"}
            for p, _ in neighbors
        ],
        agent_trace=[{"agent": "discovery", "tool": "nearest_neighbors", "detail": f"k={k}"}],
        data={
            "neighbors": [{"pmid": p, "similarity": s} for p, s in neighbors],
            "adjacent_clusters": [
                {"cluster_id": cid, "count": count} for cid, count in adjacent
            ],
            "gap_cells": gap_cells,
        },
    )


def run_evidence(
    dataset: MapDataset,
    selection_pmids: list[str],
    model_client: ModelClient,
    schema: dict[str, str] | None = None,
) -> AgentResponse:
    if not selection_pmids:
        raise EmptySelectionError("evidence extraction needs a non-empty selection")
    schema = schema or DEFAULT_EVIDENCE_SCHEMA
    records = []
    provenance = []
    failures = 0
    for pmid in sorted(set(selection_pmids)):
        article = dataset.by_pmid[pmid]
        try:
            extracted = model_client.extract_fields(article.text(), schema)
        except ModelClientError as exc:
            records.append({"pmid": pmid, "error": str(exc)})
            failures += 1
            continue
        record: dict = {"pmid": pmid}
        for fname in schema:
            hit = extracted.get(fname)
            if hit is None:
                record[fname] = "not reported"
            else:
                value, snippet = hit
                record[fname] = value
                provenance.append({"pmid": pmid, "snippet": snippet, "source_type": "abstract"})
        records.append(record)
    text = (
        f"Extracted {len(schema)} fields from {len(records)} articles"
        + (f" ({failures} failed)" if failures else "")
        + "."
    )
    return AgentResponse(
        text=text,
        provenance=provenance,
        agent_trace=[
            {"agent": "evidence", "tool": "extract_fields", "detail": f"{len(records)} articles"}
        ],
        data={"schema": schema, "records": records},
    )


def run_scholar(
    dataset: MapDataset,
    query_text: str,
    validated: ValidatedContext,
    model_client: ModelClient,
    mode: str = "in_collection",
    m: int = 3,
    open_client=None,
) -> AgentResponse:
    if mode not in ("in_collection", "open"):
        raise AgentError(f"unknown retrieval mode {mode!r}")
    question = query_text.strip() or "Summarize the current selection."

    if mode == "open":
        if open_client is None:
            raise ModeUnavailableError("open retrieval requires a configured open client")
        hits = open_client.search(question, m)
        evidence = [
            {"pmid": h["pmid"], "title": h["title"], "snippet": h.get("snippet", h["title"])}
            for h in hits
        ]
        source_type = "open"
    else:
        restriction = set(validated.effective_or_all(dataset))
        ranked = keyword_search(dataset.keyword_index, question.lower().split(), restriction)
        hits = ranked[:m]
        meta = dataset.manifest.get("embedding", {})
        if (
            len(hits) < m
            and dataset.embeddings is not None
            and meta.get("method") == "hashed_tfidf"
        ):
            qvec = hash_embed_text(question, int(meta["d"]), int(meta["seed"]))
            extra = knn_to_vector(
                dataset.embeddings, qvec, m, exclude=set(hits), restrict=restriction
            )
            for pmid, sim in extra:
                if len(hits) >= m:
                    break
                if sim > 0.0:
                    hits.append(pmid)
        evidence = [
            {
                "pmid": p,
                "title": dataset.by_pmid[p].title,
                "snippet": dataset.by_pmid[p].title,
            }
            for p in hits
        ]
        source_type = "in_collection"

    if evidence:
        text = model_client.compose_answer(question, evidence)
    else:
        text = "No supporting articles found in the current selection."
    response = AgentResponse(
        text=text,
        provenance=[
            {"pmid": ev["pmid"], "snippet": ev["snippet"], "source_type": source_type}
            for ev in evidence
        ],
        agent_trace=[
            {
                "agent": "scholar",
                "tool": "retrieve_compose",
                "detail": f"mode={mode}, hits={len(evidence)}",
            }
        ],
    )
    _check_grounding(response)
    return response


def _check_grounding(response: AgentResponse) -> None:
    cited = set(CITATION_RE.findall(response.text))
    known = {p["pmid"] for p in response.provenance}
    stray = sorted(c for c in cited if c not in known)
    if stray:
        raise AgentError(f"text cites pmids without provenance: {', '.join(stray)}")


# ---------------------------------------------------------------------------
# UI action validation
# ---------------------------------------------------------------------------


def validate_action(action: UIAction, dataset: MapDataset) -> list[str]:
    """Schema problems for one action; empty list means valid."""
    problems: list[str] = []
    p = action.parameters
    if action.action_type == "highlight_clusters":
        ids = p.get("cluster_ids")
        if not isinstance(ids, list) or not ids:
            problems.append("highlight_clusters needs non-empty cluster_ids")
        else:
            known = dataset.cluster_ids()
            bad = [c for c in ids if c not in known]
            if bad:
                problems.append(f"unknown cluster ids: {bad}")
    elif action.action_type in ("select_pmids", "pin_papers"):
        pmids = p.get("pmids")
        if not isinstance(pmids, list) or not pmids:
            problems.append(f"{action.action_type} needs non-empty pmids")
        else:
            bad = [x for x in pmids if x not in dataset.by_pmid]
            if bad:
                problems.append(f"unknown pmids: {bad}")
    elif action.action_type == "set_year_filter":
        yr = p.get("year_range")
        if (
            not isinstance(yr, (list, tuple))
            or len(yr) != 2
            or not all(isinstance(v, int) for v in yr)
            or yr[0] > yr[1]
        ):
            problems.append("set_year_filter needs year_range [min, max] with min <= max")
    elif action.action_type == "annotate":
        if not (
            isinstance(p.get("x"), (int, float))
            and isinstance(p.get("y"), (int, float))
            and isinstance(p.get("text"), str)
        ):
            problems.append("annotate needs x, y, text")
    elif action.action_type == "fly_to":
        if not (
            isinstance(p.get("x"), (int, float))
            and isinstance(p.get("y"), (int, float))
            and isinstance(p.get("zoom"), (int, float))
            and p.get("zoom") > 0
        ):
            problems.append("fly_to needs x, y and positive zoom")
    elif action.action_type == "clear_highlight":
        if p:
            problems.append("clear_highlight takes no parameters")
    else:
        problems.append(f"unknown action_type {action.action_type!r}")
    return problems


def validate_actions(response: AgentResponse, dataset: MapDataset) -> None:
    problems: list[str] = []
    for action in response.actions:
        problems.extend(validate_action(action, dataset))
    if problems:
        raise ActionValidationError(problems)


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------

_COMPOSITE_RE = re.compile(r"\s+then\s+|;", re.IGNORECASE)


def _infer_analytical(query: str, validated: ValidatedContext) -> tuple[str, dict]:
    q = query.lower()
    cluster_ids = validated.payload.selection.cluster_ids
    if "journal" in q:
        return "journal_top", {}
    if "histogram" in q or "citation" in q:
        return "citation_histogram", {}
    if "compare" in q and len(cluster_ids) >= 2:
        return "cluster_compare", {"cluster_a": cluster_ids[0], "cluster_b": cluster_ids[1]}
    return "trend_by_year", {}


def _run_specialist(
    specialist: str,
    dataset: MapDataset,
    part: str,
    validated: ValidatedContext,
    model_client: ModelClient,
    mode: str,
    open_client,
) -> AgentResponse:
    selection = validated.effective_or_all(dataset)
    if specialist == "analytical":
        request, params = _infer_analytical(part, validated)
        return run_analytical(dataset, selection, request, params)
    if specialist == "discovery":
        if validated.effective is None:
            raise EmptySelectionError("discovery needs an explicit selection")
        return run_discovery(dataset, validated.effective)
    if specialist == "evidence":
        if validated.effective is None:
            raise EmptySelectionError("evidence extraction needs an explicit selection")
        return run_evidence(dataset, validated.effective, model_client)
    return run_scholar(
        dataset, part, validated, model_client, mode=mode, open_client=open_client
    )


def answer_query(
    dataset: MapDataset,
    payload: ContextPayload,
    model_client: ModelClient | None = None,
    mode: str = "in_collection",
    open_client=None,
) -> AgentResponse:
    """Validate, route (splitting composite queries on ' then '/';'), run the
    specialists in order, and merge their outputs into one response."""
    client = model_client or StubModelClient()
    validated = validate_context(payload, dataset)
    question = payload.query_text.strip() or "Summarize the current selection."
    parts = [p.strip() for p in _COMPOSITE_RE.split(question) if p.strip()]
    if not parts:
        parts = [question]

    responses: list[AgentResponse] = []
    for part in parts:
        specialist = route_intent(part, payload.selection, client)
        responses.append(
            _run_specialist(specialist, dataset, part, validated, client, mode, open_client)
        )

    if len(responses) == 1:
        merged = responses[0]
    else:
        seen: set[tuple] = set()
        provenance = []
        for r in responses:
            for entry in r.provenance:
                key = (entry["pmid"], entry["snippet"], entry["source_type"])
                if key not in seen:
                    seen.add(key)
                    provenance.append(entry)
        merged = AgentResponse(
            text="\n\n".join(r.text for r in responses),
            actions=[a for r in responses for a in r.actions],
            provenance=provenance,
            agent_trace=[t for r in responses for t in r.agent_trace],
            data={"parts": [r.data for r in responses]},
        )
    _check_grounding(merged)
    validate_actions(merged, dataset)
    return merged
