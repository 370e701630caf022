"""Corpus ingestion: TSV parsing/writing, text cleanup, and metadata enrichment.

The canonical on-disk form of a dataset is a UTF-8 TSV with one article per
row.  The column set below is fixed; unknown columns are carried through
untouched so alternative corpora can keep their own metadata.
"""

from __future__ import annotations

import hashlib
import io
import json
import re
import time
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol

CANONICAL_COLUMNS = [
    "pmid",
    "date",
    "journal",
    "title",
    "abstract",
    "mesh_terms",
    "x",
    "y",
    "citation_count",
    "size",
    "color",
]

YEAR_MIN = 1800


class CorpusError(Exception):
    """Base class for corpus-level failures."""


class SchemaError(CorpusError):
    """The TSV header is unusable (e.g. no pmid column)."""


class DuplicateRecordError(CorpusError):
    def __init__(self, pmid: str):
        super().__init__(f"duplicate pmid {pmid!r}")
        self.pmid = pmid


class RowParseError(CorpusError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


_TAG_RE = re.compile(r"<[^>]*>")
_WS_RE = re.compile(r"\s+")
_YEAR_RE = re.compile(r"^(\d{4})(?:$|[-/ ])")


def normalize_text(raw: str) -> str:
    """Strip markup tags, NFC-normalize, and collapse whitespace runs.

    Total and idempotent: normalize_text(normalize_text(s)) == normalize_text(s).
    """
    stripped = _TAG_RE.sub("", raw)
    composed = unicodedata.normalize("NFC", stripped)
    return _WS_RE.sub(" ", composed).strip()


def _parse_year(date_str: str) -> int | None:
    m = _YEAR_RE.match(date_str.strip())
    return int(m.group(1)) if m else None


def _current_year() -> int:
    return time.gmtime().tm_year


@dataclass
class Article:
    """One corpus record; mirrors a map-TSV row."""

    pmid: str
    date: str = ""
    journal: str = ""
    title: str = ""
    abstract: str = ""
    mesh_terms: list[str] = field(default_factory=list)
    x: float | None = None
    y: float | None = None
    citation_count: int = 0
    size: float = 0.0
    color: str = ""
    extra: dict[str, str] = field(default_factory=dict)

    @property
    def year(self) -> int | None:
        return _parse_year(self.date)

    def text(self) -> str:
        """Title and abstract joined; the embedding input."""
        return f"{self.title} {self.abstract}".strip()


def _split_mesh(cell: str) -> list[str]:
    # Semicolon is the canonical separator; comma-separated input is accepted.
    cell = cell.strip()
    if not cell:
        return []
    sep = ";" if ";" in cell else ","
    return [t.strip() for t in cell.split(sep) if t.strip()]


def _parse_float(cell: str, line_no: int, col: str) -> float | None:
    if cell == "":
        return None
    try:
        return float(cell)
    except ValueError:
        raise RowParseError(line_no, f"non-numeric {col}: {cell!r}") from None


def parse_tsv(source: str | io.TextIOBase | Path) -> list[Article]:
    """Parse a corpus TSV into Articles.

    The header must contain a ``pmid`` column; any column outside the
    canonical set is preserved verbatim in ``Article.extra``.
    """
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SchemaError("empty input: no header row")

    header = lines[0].split("\t")
    if "pmid" not in header:
        raise SchemaError("header has no pmid column")
    col_index = {name: i for i, name in enumerate(header)}
    extra_cols = [c for c in header if c not in CANONICAL_COLUMNS]
    current_year = _current_year()

    articles: list[Article] = []
    seen: set[str] = set()
    for line_no, line in enumerate(lines[1:], start=2):
        if line == "":
            continue
        cells = line.split("\t")
        if len(cells) < len(header):
            cells = cells + [""] * (len(header) - len(cells))

        def cell(name: str) -> str:
            i = col_index.get(name)
            return cells[i] if i is not None and i < len(cells) else ""

        pmid = cell("pmid").strip()
        if not pmid:
            raise RowParseError(line_no, "empty pmid")
        if pmid in seen:
            raise DuplicateRecordError(pmid)
        seen.add(pmid)

        date = cell("date").strip()
        year = _parse_year(date)
        if year is not None and not (YEAR_MIN <= year <= current_year + 1):
            raise RowParseError(line_no, f"year {year} outside [{YEAR_MIN}, {current_year + 1}]")

        cc_cell = cell("citation_count").strip()
        if cc_cell == "":
            citation_count = 0
        else:
            try:
                citation_count = int(float(cc_cell))
            except ValueError:
                raise RowParseError(line_no, f"non-numeric citation_count: {cc_cell!r}") from None
        if citation_count < 0:
            raise RowParseError(line_no, f"negative citation_count: {citation_count}")

        size_val = _parse_float(cell("size").strip(), line_no, "size")
        articles.append(
            Article(
                pmid=pmid,
                date=date,
                journal=cell("journal"),
                title=cell("title"),
                abstract=cell("abstract"),
                mesh_terms=_split_mesh(cell("mesh_terms")),
                x=_parse_float(cell("x").strip(), line_no, "x"),
                y=_parse_float(cell("y").strip(), line_no, "y"),
                citation_count=citation_count,
                size=size_val if size_val is not None else 0.0,
                color=cell("color"),
                extra={
                    c: cells[col_index[c]]
                    for c in extra_cols
                    if col_index[c] < len(cells) and cells[col_index[c]] != ""
                },
            )
        )
    return articles


def _fmt_float(value: float | None) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _sanitize(cell: str) -> str:
    # Tabs and newlines cannot be represented inside a TSV cell.
    return cell.replace("\t", " ").replace("\n", " ").replace("\r", " ")


def write_tsv(articles: Iterable[Article]) -> str:
    """Serialize Articles to the canonical TSV form.

    Canonical columns come first, then any extra columns in sorted order.
    ``parse_tsv(write_tsv(arts))`` reproduces every field, and the canonical
    form is a fixpoint: re-serializing the parse yields identical bytes.
    """
    articles = list(articles)
    extra_cols = sorted({k for a in articles for k in a.extra})
    header = CANONICAL_COLUMNS + extra_cols
    out = ["\t".join(header)]
    for a in articles:
        row = [
            _sanitize(a.pmid),
            _sanitize(a.date),
            _sanitize(a.journal),
            _sanitize(a.title),
            _sanitize(a.abstract),
            ";".join(_sanitize(t) for t in a.mesh_terms),
            _fmt_float(a.x),
            _fmt_float(a.y),
            str(a.citation_count),
            _fmt_float(a.size),
            _sanitize(a.color),
        ]
        row.extend(_sanitize(a.extra.get(c, "")) for c in extra_cols)
        out.append("\t".join(row))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Enrichment (citation metrics) and bibliographic clients
# ---------------------------------------------------------------------------


@dataclass
class EnrichmentRecord:
    pmid: str
    citation_count: int = 0
    rcr: float = 0.0


@dataclass
class MergeReport:
    unmatched: list[str] = field(default_factory=list)
    conflicts: list[str] = field(default_factory=list)


def merge_sources(
    base: list[Article], enrichment: Mapping[str, EnrichmentRecord]
) -> tuple[list[Article], MergeReport]:
    """Fill citation metrics into the base corpus.

    The user-supplied base file is ground truth: on conflicting non-null
    values the base wins and the conflict is reported.  Enrichment records
    whose pmid is absent from the base are reported as unmatched.
    """
    report = MergeReport()
    by_pmid = {a.pmid: a for a in base}
    for pmid in enrichment:
        if pmid not in by_pmid:
            report.unmatched.append(pmid)
    report.unmatched.sort()

    merged: list[Article] = []
    for a in base:
        rec = enrichment.get(a.pmid)
        if rec is None:
            merged.append(a)
            continue
        citation_count = a.citation_count
        size = a.size
        if rec.citation_count:
            if a.citation_count == 0:
                citation_count = rec.citation_count
            elif a.citation_count != rec.citation_count:
                report.conflicts.append(
                    f"{a.pmid}: citation_count base={a.citation_count} enrichment={rec.citation_count}"
                )
        if rec.rcr:
            if a.size == 0.0:
                size = rec.rcr
            elif a.size != rec.rcr:
                report.conflicts.append(f"{a.pmid}: size base={a.size} enrichment={rec.rcr}")
        merged.append(
            Article(
                pmid=a.pmid,
                date=a.date,
                journal=a.journal,
                title=a.title,
                abstract=a.abstract,
                mesh_terms=list(a.mesh_terms),
                x=a.x,
                y=a.y,
                citation_count=citation_count,
                size=size,
                color=a.color,
                extra=dict(a.extra),
            )
        )
    return merged, report


class FetchError(CorpusError):
    """Network-level failure; the caller may retry."""


class DecodeError(CorpusError):
    def __init__(self, pmid: str, message: str):
        super().__init__(f"pmid {pmid}: {message}")
        self.pmid = pmid


class BibliographicClient(Protocol):
    """One batch request against a bibliographic service."""

    def fetch_batch(self, pmids: tuple[str, ...]) -> dict[str, EnrichmentRecord]: ...


def request_key(endpoint: str, pmids: tuple[str, ...]) -> str:
    digest = hashlib.sha256("\n".join(sorted(pmids)).encode("utf-8")).hexdigest()[:16]
    return f"{endpoint}_{digest}"


class FixtureBibliographicClient:
    """Replays recorded responses: one JSON document per request key."""

    def __init__(self, fixture_dir: str | Path, endpoint: str = "icite"):
        self.fixture_dir = Path(fixture_dir)
        self.endpoint = endpoint

    def fixture_path(self, pmids: tuple[str, ...]) -> Path:
        return self.fixture_dir / f"{request_key(self.endpoint, pmids)}.json"

    def record(self, pmids: tuple[str, ...], records: Mapping[str, EnrichmentRecord]) -> Path:
        path = self.fixture_path(pmids)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            p: {"citation_count": r.citation_count, "rcr": r.rcr} for p, r in records.items()
        }
        path.write_text(json.dumps(payload, sort_keys=True, indent=1), encoding="utf-8")
        return path

    def fetch_batch(self, pmids: tuple[str, ...]) -> dict[str, EnrichmentRecord]:
        path = self.fixture_path(pmids)
        if not path.exists():
            raise FetchError(f"no recorded response for request {path.name}")
        raw = json.loads(path.read_text(encoding="utf-8"))
        out: dict[str, EnrichmentRecord] = {}
        for pmid, rec in raw.items():
            try:
                out[pmid] = EnrichmentRecord(
                    pmid=pmid,
                    citation_count=int(rec["citation_count"]),
                    rcr=float(rec.get("rcr", 0.0)),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DecodeError(pmid, str(exc)) from exc
        return out


class ICiteClient:
    """Live citation-metrics client (batched GETs, simple retry backoff)."""

    BASE_URL = "https://icite.od.nih.gov/api/pubs"

    def __init__(self, timeout: float = 30.0, max_retries: int = 3, pause: float = 0.34):
        self.timeout = timeout
        self.max_retries = max_retries
        self.pause = pause

    def fetch_batch(self, pmids: tuple[str, ...]) -> dict[str, EnrichmentRecord]:
        import httpx

        params = {"pmids": ",".join(pmids), "format": "json"}
        last_exc: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                resp = httpx.get(self.BASE_URL, params=params, timeout=self.timeout)
                resp.raise_for_status()
                data = resp.json()
                break
            except Exception as exc:  # httpx errors and JSON decode
                last_exc = exc
                time.sleep(self.pause * (attempt + 1))
        else:
            raise FetchError(f"icite request failed after {self.max_retries} tries: {last_exc}")

        out: dict[str, EnrichmentRecord] = {}
        for rec in data.get("data", []):
            pmid = str(rec.get("pmid", ""))
            try:
                out[pmid] = EnrichmentRecord(
                    pmid=pmid,
                    citation_count=int(rec.get("citation_count") or 0),
                    rcr=float(rec.get("relative_citation_ratio") or 0.0),
                )
            except (TypeError, ValueError) as exc:
                raise DecodeError(pmid, str(exc)) from exc
        time.sleep(self.pause)
        return out


def fetch_bibliographic(
    pmids: list[str], client: BibliographicClient, batch_size: int = 200
) -> tuple[dict[str, EnrichmentRecord], list[str]]:
    """Fetch enrichment records in batches; returns (records, unresolved pmids)."""
    records: dict[str, EnrichmentRecord] = {}
    for start in range(0, len(pmids), batch_size):
        batch = tuple(pmids[start : start + batch_size])
        records.update(client.fetch_batch(batch))
    unresolved = [p for p in pmids if p not in records]
    return records, unresolved
