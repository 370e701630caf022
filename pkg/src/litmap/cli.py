"""Command-line entry points: full pipeline, single stages, and the server.

Exit codes: 0 success, 2 validation problem (arguments, config, missing
prerequisite artifact), 3 stage failure during computation.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, PipelineConfig
from .pipeline import (
    MissingArtifactError,
    PipelineError,
    PipelineStageError,
    bundle_stage_body,
    cluster_stage_body,
    embed_stage,
    ingest_stage,
    label_stage_body,
    layout_stage_body,
    normalize_skip,
    run_pipeline,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_STAGE = 3


def _load_config(path: str) -> PipelineConfig:
    config = PipelineConfig.from_file(_require_file(path, "config file"))
    config.validate()
    return config


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} {p} does not exist")
    return p


def _add_config_out(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="flat key=value config file")
    sub.add_argument("--out", required=True, help="artifact directory")


def _add_embedding_source(sub: argparse.ArgumentParser) -> None:
    group = sub.add_mutually_exclusive_group()
    group.add_argument("--embeddings", help="precomputed embeddings file")
    group.add_argument(
        "--test-embedder",
        action="store_true",
        help="derive embeddings from hashed tf-idf of title+abstract",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="litmap", description="build and serve interactive literature maps"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", help="run every stage: ingest to manifest")
    p.add_argument("--input", required=True, help="corpus TSV")
    _add_embedding_source(p)
    _add_config_out(p)
    p.add_argument("--citations", help="citing->cited JSON for edge bundling")
    p.add_argument(
        "--skip",
        default="",
        help="comma-separated optional stages to skip (label, bundle)",
    )
    p.set_defaults(handler=cmd_pipeline)

    p = sub.add_parser("layout", help="embed (or load embeddings) and lay out the corpus")
    p.add_argument("--input", required=True, help="corpus TSV")
    _add_embedding_source(p)
    _add_config_out(p)
    p.set_defaults(handler=cmd_layout)

    p = sub.add_parser("cluster", help="cluster an existing layout")
    _add_config_out(p)
    p.set_defaults(handler=cmd_cluster)

    p = sub.add_parser("label", help="label an existing cluster tree")
    _add_config_out(p)
    p.set_defaults(handler=cmd_label)

    p = sub.add_parser("bundle", help="bundle citation edges over an existing layout")
    _add_config_out(p)
    p.add_argument("--citations", required=True, help="citing->cited JSON")
    p.set_defaults(handler=cmd_bundle)

    p = sub.add_parser("serve", help="serve one or more artifact directories over HTTP")
    p.add_argument("--data", required=True, help="dataset directory (or parent of several)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument(
        "--model-client",
        choices=("stub", "replay", "live"),
        default="stub",
        help="model backend for the agent gateway",
    )
    p.add_argument("--fixtures", help="fixture directory for the replay client")
    p.add_argument("--record", action="store_true", help="record unseen replay requests")
    p.add_argument("--base-url", help="chat-completions base URL for the live client")
    p.add_argument("--model", help="model name for the live client")
    p.add_argument(
        "--api-key-env",
        default="LITMAP_API_KEY",
        help="environment variable holding the live API key",
    )
    p.add_argument("--static", help="optional directory of UI assets to serve at /")
    p.set_defaults(handler=cmd_serve)

    return parser


def _require_embedding_source(args: argparse.Namespace) -> None:
    if not args.embeddings and not args.test_embedder:
        raise ConfigError("pass --embeddings or --test-embedder")


def cmd_pipeline(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    _require_file(args.input, "input corpus")
    _require_embedding_source(args)
    if args.embeddings:
        _require_file(args.embeddings, "embeddings file")
    if args.citations:
        _require_file(args.citations, "citations file")
    skip = normalize_skip([s for s in args.skip.split(",") if s.strip()])
    manifest = run_pipeline(
        args.input,
        args.out,
        config,
        embeddings_path=args.embeddings,
        test_embedder=args.test_embedder,
        citations_path=args.citations,
        skip=skip,
    )
    print(f"wrote {Path(args.out) / 'manifest.json'} ({manifest['counts']['articles']} articles)")
    return EXIT_OK


def cmd_layout(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    _require_file(args.input, "input corpus")
    _require_embedding_source(args)
    if args.embeddings:
        _require_file(args.embeddings, "embeddings file")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        articles = ingest_stage(args.input)
        matrix, _ = embed_stage(
            articles, config, out, embeddings_path=args.embeddings, test_embedder=args.test_embedder
        )
        layout_stage_body(articles, matrix, config, out)
    except MissingArtifactError:
        raise
    except Exception as exc:
        raise PipelineStageError("layout", exc) from exc
    print(f"wrote {out / 'map.tsv'}")
    return EXIT_OK


def _run_single(stage: str, body) -> None:
    try:
        body()
    except MissingArtifactError:
        raise
    except Exception as exc:
        raise PipelineStageError(stage, exc) from exc


def cmd_cluster(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    out = Path(args.out)
    _run_single("cluster", lambda: cluster_stage_body(out, config))
    print(f"wrote {out / 'clusters.json'}")
    return EXIT_OK


def cmd_label(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    out = Path(args.out)
    _run_single("label", lambda: label_stage_body(out, config))
    print(f"wrote {out / 'labels.json'}")
    return EXIT_OK


def cmd_bundle(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    _require_file(args.citations, "citations file")
    out = Path(args.out)
    _run_single("bundle", lambda: bundle_stage_body(out, config, args.citations))
    print(f"wrote {out / 'edges.json'}")
    return EXIT_OK


def _build_model_client(args: argparse.Namespace):
    from .model_clients import LiveModelClient, ReplayModelClient, StubModelClient

    if args.model_client == "stub":
        return StubModelClient()
    if args.model_client == "replay":
        if not args.fixtures:
            raise ConfigError("--fixtures is required with --model-client replay")
        fallback = StubModelClient() if args.record else None
        return ReplayModelClient(args.fixtures, record=args.record, fallback=fallback)
    if not args.base_url or not args.model:
        raise ConfigError("--base-url and --model are required with --model-client live")
    api_key = os.environ.get(args.api_key_env, "")
    if not api_key:
        raise ConfigError(f"environment variable {args.api_key_env} is empty")
    return LiveModelClient(args.base_url, api_key, args.model)


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import ServerError, build_app

    client = _build_model_client(args)
    try:
        app = build_app(args.data, model_client=client, static_dir=args.static)
    except ServerError as exc:
        raise ConfigError(str(exc)) from exc
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (ConfigError, MissingArtifactError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
