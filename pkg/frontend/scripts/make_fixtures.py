#!/usr/bin/env python3
"""Generate the recorded fixtures the UI test suite runs against.

Everything here reaches the map backend the way any external client would:
the pipeline runs through the ``litmap`` command line, the payloads are
captured from a live ``litmap serve`` process over HTTP, and the hover-pick
answers come from the package's public spatial index — the same structure
the server answers selection queries with (there is no per-cursor HTTP
endpoint, so the index itself is the reference).

Usage (with the backend package installed, e.g. ``pip install -e ..``):

    python3 scripts/make_fixtures.py

Fixtures land in test/fixtures/ and are committed, so the TypeScript tests
run without Python present.  Re-run this script only when the backend's wire
formats change.
"""

from __future__ import annotations

import json
import math
import random
import socket
import subprocess
import sys
import tempfile
import time
import urllib.request
from pathlib import Path

FRONTEND = Path(__file__).resolve().parent.parent
FIXTURES = FRONTEND / "test" / "fixtures"

VIEWPORT = {"width": 800.0, "height": 600.0}
HOVER_RADIUS_PX = 12.0
SEED = 2026

TOPIC_VOCAB = [
    ("cardiology", ["heart", "cardiac", "myocardial", "infarction", "arrhythmia"]),
    ("oncology", ["tumor", "cancer", "chemotherapy", "metastasis", "carcinoma"]),
    ("neurology", ["brain", "neuron", "stroke", "seizure", "cognitive"]),
]


def make_corpus_tsv(n: int, seed: int = 7) -> str:
    """A small synthetic corpus with three vocab-separated topics."""
    rng = random.Random(seed)
    header = "pmid\tdate\tjournal\ttitle\tabstract\tmesh_terms\tx\ty\tcitation_count\tsize\tcolor"
    rows = [header]
    for i in range(n):
        name, words = TOPIC_VOCAB[i % len(TOPIC_VOCAB)]
        title = f"{words[rng.randrange(len(words))]} study {i}"
        abstract = " ".join(rng.choice(words) for _ in range(30))
        rows.append(
            "\t".join(
                [
                    str(10000 + i),
                    f"{2000 + i % 20}-01-{1 + i % 27:02d}",
                    f"Journal of {name}",
                    title,
                    abstract,
                    f"{name};{words[0]}",
                    "",  # x: assigned by the pipeline
                    "",  # y
                    str(rng.randrange(200)),
                    "",  # size
                    "",  # color
                ]
            )
        )
    return "\n".join(rows) + "\n"


def make_citations(pmids: list[str], n_citers: int, seed: int = 11) -> dict[str, list[str]]:
    rng = random.Random(seed)
    return {f"C{i}": rng.sample(pmids, min(3, len(pmids))) for i in range(n_citers)}


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def http_get(url: str) -> bytes:
    with urllib.request.urlopen(url, timeout=30) as resp:
        return resp.read()


def http_post_json(url: str, payload: dict) -> tuple[int, bytes]:
    req = urllib.request.Request(
        url,
        data=json.dumps(payload).encode("utf-8"),
        headers={"content-type": "application/json"},
        method="POST",
    )
    with urllib.request.urlopen(req, timeout=60) as resp:
        return resp.status, resp.read()


def parse_tsv_points(tsv_text: str) -> list[tuple[str, float, float, str]]:
    """(pmid, x, y, date) per row, parsed with plain string ops."""
    lines = [ln for ln in tsv_text.split("\n") if ln != ""]
    header = lines[0].split("\t")
    col = {name: i for i, name in enumerate(header)}
    out = []
    for line in lines[1:]:
        cells = line.split("\t")
        out.append(
            (
                cells[col["pmid"]],
                float(cells[col["x"]]),
                float(cells[col["y"]]),
                cells[col["date"]],
            )
        )
    return out


def independent_year(date: str) -> int:
    """Year the binary block should carry for this date; 0 when unknown."""
    head = date.strip()[:4]
    rest = date.strip()[4:5]
    if len(head) == 4 and head.isdigit() and rest in ("", "-", "/", " "):
        return int(head)
    return 0


def finest_assignments(clusters_doc: dict) -> dict[str, int]:
    """pmid -> cluster id at the finest level (level 0; parents are coarser)."""
    nodes = clusters_doc["nodes"]
    if not nodes:
        return {}
    finest = min(node["level"] for node in nodes)
    out: dict[str, int] = {}
    for node in nodes:
        if node["level"] == finest:
            for pmid in node["member_pmids"]:
                out[pmid] = node["cluster_id"]
    return out


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix="litmap-ui-fixtures-"))
    dataset_dir = tmp / "uifix"

    corpus_tsv = make_corpus_tsv(60)
    pmids_in = [line.split("\t")[0] for line in corpus_tsv.strip().split("\n")[1:]]
    (tmp / "corpus.tsv").write_text(corpus_tsv, encoding="utf-8")
    (tmp / "citations.json").write_text(json.dumps(make_citations(pmids_in, 200)))
    (tmp / "map.cfg").write_text(
        "seed = 42\nembedding_dim = 64\nlayout_updates = 20000\nbundle_iterations = 4\n"
    )

    print("running pipeline ...", flush=True)
    subprocess.run(
        [
            "litmap",
            "pipeline",
            "--input", str(tmp / "corpus.tsv"),
            "--test-embedder",
            "--config", str(tmp / "map.cfg"),
            "--citations", str(tmp / "citations.json"),
            "--out", str(dataset_dir),
        ],
        check=True,
    )

    port = free_port()
    base = f"http://127.0.0.1:{port}"
    print(f"starting server on {base} ...", flush=True)
    server = subprocess.Popen(
        ["litmap", "serve", "--data", str(dataset_dir), "--port", str(port), "--host", "127.0.0.1"],
    )
    try:
        for _ in range(100):
            try:
                if json.loads(http_get(f"{base}/api/health"))["status"] == "ok":
                    break
            except Exception:
                time.sleep(0.2)
        else:
            raise RuntimeError("server did not come up")

        datasets = json.loads(http_get(f"{base}/api/datasets"))
        dataset_id = datasets[0]["id"]
        prefix = f"{base}/api/datasets/{dataset_id}"

        points_bin = http_get(f"{prefix}/points?format=binary")
        points_tsv = http_get(f"{prefix}/points?format=tsv").decode("utf-8")
        clusters_doc = json.loads(http_get(f"{prefix}/clusters"))
        labels_doc = json.loads(http_get(f"{prefix}/labels"))
        edges_doc = json.loads(http_get(f"{prefix}/edges"))

        (FIXTURES / "points.bin").write_bytes(points_bin)
        (FIXTURES / "points.tsv").write_text(points_tsv, encoding="utf-8")
        (FIXTURES / "clusters.json").write_text(json.dumps(clusters_doc, indent=1))
        (FIXTURES / "labels.json").write_text(json.dumps(labels_doc, indent=1))
        (FIXTURES / "edges.json").write_text(json.dumps(edges_doc, indent=1))

        rows = parse_tsv_points(points_tsv)
        assigned = finest_assignments(clusters_doc)
        meta = {
            "dataset_id": dataset_id,
            "n": len(rows),
            "pmids": [r[0] for r in rows],
            "years": [independent_year(r[3]) for r in rows],
            "clusters": [assigned.get(r[0], -1) for r in rows],
            "cluster_ids": sorted({cid for cid in assigned.values()}),
        }
        (FIXTURES / "meta.json").write_text(json.dumps(meta, indent=1))

        # ------------------------------------------------------------------
        # hover oracle: 50 cursor positions answered by the public spatial
        # index over the same full-precision TSV coordinates the client
        # indexes.  Screen->world on the client is (sx - w/2) / zoom + cx;
        # the oracle evaluates at exactly that reconstructed world point so
        # both sides quantize identically.
        # ------------------------------------------------------------------
        from litmap.spatial import Quadtree

        tree = Quadtree([(pmid, x, y) for pmid, x, y, _ in rows])
        xs = [r[1] for r in rows]
        ys = [r[2] for r in rows]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        span_x = max(x1 - x0, 1e-9)
        span_y = max(y1 - y0, 1e-9)
        zoom = 0.9 * min(VIEWPORT["width"] / span_x, VIEWPORT["height"] / span_y)
        camera = {"x": (x0 + x1) / 2, "y": (y0 + y1) / 2, "zoom": zoom}

        rng = random.Random(SEED)
        cases = []
        radius_world = HOVER_RADIUS_PX / zoom
        for i in range(50):
            if i < 35:
                # cursor near a real point, in screen space
                pmid, px, py, _ = rows[rng.randrange(len(rows))]
                sx = (px - camera["x"]) * zoom + VIEWPORT["width"] / 2 + rng.uniform(-20, 20)
                sy = (py - camera["y"]) * zoom + VIEWPORT["height"] / 2 + rng.uniform(-20, 20)
            else:
                # anywhere on (or just off) the canvas; usually empty space
                sx = rng.uniform(-40, VIEWPORT["width"] + 40)
                sy = rng.uniform(-40, VIEWPORT["height"] + 40)
            wx = (sx - VIEWPORT["width"] / 2) / zoom + camera["x"]
            wy = (sy - VIEWPORT["height"] / 2) / zoom + camera["y"]
            hit = tree.nearest_in_radius((wx, wy), radius_world)
            cases.append({"sx": sx, "sy": sy, "expected": None if hit is None else hit[0]})
        n_hits = sum(1 for c in cases if c["expected"] is not None)
        print(f"hover oracle: {n_hits}/50 cursor positions hit a point")
        assert 0 < n_hits < 50, "want a mix of hits and empty-space picks"
        (FIXTURES / "hover_oracle.json").write_text(
            json.dumps(
                {"camera": camera, "viewport": VIEWPORT, "radius_px": HOVER_RADIUS_PX, "cases": cases},
                indent=1,
            )
        )

        # ------------------------------------------------------------------
        # polygon selection oracle: a lasso-shaped polygon answered by the
        # server's own selection endpoint over HTTP.
        # ------------------------------------------------------------------
        cx = (x0 + x1) / 2
        cy = (y0 + y1) / 2
        rx = span_x * 0.35
        ry = span_y * 0.35
        polygon = []
        for k in range(12):
            ang = 2 * math.pi * k / 12
            wobble = 0.7 + 0.3 * ((k * 7) % 5) / 4
            polygon.append([cx + rx * wobble * math.cos(ang), cy + ry * wobble * math.sin(ang)])
        status, body = http_post_json(f"{prefix}/selection/polygon", {"vertices": polygon})
        assert status == 200, body
        selection = json.loads(body)
        assert 0 < len(selection["pmids"]) < len(rows), "polygon should catch a strict subset"
        print(f"polygon oracle: {selection['count']} points inside")
        (FIXTURES / "polygon_oracle.json").write_text(
            json.dumps({"vertices": polygon, "response": selection}, indent=1)
        )

        # ------------------------------------------------------------------
        # agent discovery scenario: select one cluster's members and ask a
        # discovery-shaped question; the recorded response carries the
        # highlight_clusters action the panel must apply.
        # ------------------------------------------------------------------
        by_cluster: dict[int, list[str]] = {}
        for pmid, cid in assigned.items():
            by_cluster.setdefault(cid, []).append(pmid)
        # straddle the two largest clusters so the discovery neighbors (and
        # the clusters the response highlights) span more than one group
        largest = sorted(by_cluster, key=lambda c: (-len(by_cluster[c]), c))[:2]
        selected = sorted(p for cid in largest for p in sorted(by_cluster[cid])[:3])
        request = {
            "dataset_id": dataset_id,
            "selection": {"pmids": selected},
            "query_text": "What related work lies nearby this selection?",
            "interaction_state": {"view": "{}"},
        }
        status, body = http_post_json(f"{base}/api/agent/query", request)
        assert status == 200, body
        response = json.loads(body)
        highlight = [a for a in response["actions"] if a["action_type"] == "highlight_clusters"]
        assert highlight, "discovery response must carry a highlight_clusters action"
        print(f"agent discovery: highlights clusters {highlight[0]['parameters']['cluster_ids']}")
        (FIXTURES / "agent_discovery.json").write_text(
            json.dumps({"request": request, "response": response}, indent=1)
        )
    finally:
        server.terminate()
        server.wait(timeout=10)

    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    sys.exit(main())
