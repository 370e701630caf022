"""Language-model client interface for the agent layer.

Three implementations share one small surface: a deterministic rule-based
stub (the default everywhere tests run), a record/replay client that stores
responses as fixture files, and a live HTTP client.  Agents never branch on
which one they hold.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Protocol


class ModelClientError(Exception):
    pass


class ModelClient(Protocol):
    def extract_fields(
        self, text: str, schema: dict[str, str]
    ) -> dict[str, tuple[str, str] | None]:
        """Per schema field: (value, supporting snippet) or None when absent."""
        ...

    def compose_answer(self, question: str, evidence: list[dict]) -> str:
        """Answer text citing evidence entries {pmid, title, snippet} as [pmid]."""
        ...

    def route_hint(self, query: str) -> str | None:
        """Optional specialist override; None defers to the keyword router."""
        ...


# ---------------------------------------------------------------------------
# Deterministic stub
# ---------------------------------------------------------------------------

_EXTRACTION_RULES: dict[str, re.Pattern] = {
    "population": re.compile(
        r"(?:enrolled|recruited|included)\s+(\d[\d,]*\s+"
        r"(?:patients|participants|adults|children|subjects|women|men|individuals))",
        re.IGNORECASE,
    ),
    "intervention": re.compile(
        r"(?:randomized to|assigned to|received|treated with)\s+"
        r"([A-Za-z0-9][A-Za-z0-9\- ]*?)(?=\s+(?:or|vs|versus)\b|[.,;])",
        re.IGNORECASE,
    ),
    "outcomes": re.compile(
        r"primary (?:outcome|endpoint)(?: measure)? was\s+([^.;]+)", re.IGNORECASE
    ),
    "study_design": re.compile(
        r"\b(randomized controlled trial|randomized trial|cohort study|case-control study|"
        r"cross-sectional study|systematic review|meta-analysis)\b",
        re.IGNORECASE,
    ),
}

DEFAULT_EVIDENCE_SCHEMA = {
    "population": "who was studied and how many",
    "intervention": "treatment or exposure applied",
    "outcomes": "primary outcome or endpoint",
    "study_design": "type of study",
}


class StubModelClient:
    """Pattern-rule client: same input, same bytes, no network."""

    def extract_fields(
        self, text: str, schema: dict[str, str]
    ) -> dict[str, tuple[str, str] | None]:
        out: dict[str, tuple[str, str] | None] = {}
        for field in schema:
            rule = _EXTRACTION_RULES.get(field)
            if rule is None:
                out[field] = None
                continue
            match = rule.search(text)
            if match is None:
                out[field] = None
            else:
                out[field] = (match.group(1).strip().lower(), match.group(0).strip())
        return out

    def compose_answer(self, question: str, evidence: list[dict]) -> str:
        if not evidence:
            return "No supporting articles found in the current selection."
        lines = [f"- {ev['title']} [{ev['pmid']}]" for ev in evidence]
        return f"Evidence for: {question.strip()}\n" + "\n".join(lines)

    def route_hint(self, query: str) -> str | None:
        return None


# ---------------------------------------------------------------------------
# Record / replay
# ---------------------------------------------------------------------------


def request_key(method: str, args: dict) -> str:
    digest = hashlib.sha256(
        json.dumps({"method": method, "args": args}, sort_keys=True).encode("utf-8")
    ).hexdigest()
    return f"{method}_{digest[:16]}"


class ReplayModelClient:
    """Replays responses stored as one JSON file per request.

    With ``record=True`` and a fallback client, unseen requests are forwarded
    and their responses written down for later offline runs.
    """

    def __init__(self, fixture_dir: str | Path, record: bool = False, fallback=None):
        self.fixture_dir = Path(fixture_dir)
        self.record = record
        self.fallback = fallback

    def _path(self, key: str) -> Path:
        return self.fixture_dir / f"{key}.json"

    def _roundtrip(self, method: str, args: dict):
        key = request_key(method, args)
        path = self._path(key)
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))["response"]
        if not self.record or self.fallback is None:
            raise ModelClientError(f"no recorded response for {key}")
        response = getattr(self.fallback, method)(**args)
        self.fixture_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps({"method": method, "response": response}, sort_keys=True, indent=1),
            encoding="utf-8",
        )
        return response

    def extract_fields(self, text, schema):
        raw = self._roundtrip("extract_fields", {"text": text, "schema": schema})
        return {k: (tuple(v) if v is not None else None) for k, v in raw.items()}

    def compose_answer(self, question, evidence):
        return self._roundtrip("compose_answer", {"question": question, "evidence": evidence})

    def route_hint(self, query):
        return self._roundtrip("route_hint", {"query": query})


# ---------------------------------------------------------------------------
# Live HTTP client
# ---------------------------------------------------------------------------


class LiveModelClient:
    """Minimal chat-completion client; requires network and credentials."""

    def __init__(self, base_url: str, api_key: str, model: str, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.timeout = timeout

    def _complete(self, prompt: str) -> str:
        import httpx

        try:
            resp = httpx.post(
                f"{self.base_url}/v1/chat/completions",
                headers={"Authorization": f"Bearer {self.api_key}"},
                json={
                    "model": self.model,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": 0,
                },
                timeout=self.timeout,
            )
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise ModelClientError(f"model request failed: {exc}") from exc
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise ModelClientError("malformed model response") from exc

    def extract_fields(self, text, schema):
        prompt = (
            "Extract the following fields from the abstract as JSON mapping field name to "
            '[value, verbatim snippet] or null if not reported. Fields: '
            + json.dumps(schema, sort_keys=True)
            + "\n\nAbstract:\n"
            + text
        )
        reply = self._complete(prompt)
        try:
            raw = json.loads(reply)
        except ValueError as exc:
            raise ModelClientError("model did not return JSON") from exc
        out = {}
        for field in schema:
            v = raw.get(field)
            out[field] = tuple(v) if isinstance(v, list) and len(v) == 2 else None
        return out

    def compose_answer(self, question, evidence):
        prompt = (
            "Answer the question strictly from the evidence list; cite every supporting "
            "article inline as [pmid].\nQuestion: "
            + question
            + "\nEvidence: "
            + json.dumps(evidence, sort_keys=True)
        )
        return self._complete(prompt)

    def route_hint(self, query):
        return None
