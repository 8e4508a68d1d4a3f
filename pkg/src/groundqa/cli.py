"""Command line: answer, serve, eval, corpora.

``groundqa answer`` without a query opens an interactive session that keeps
conversation history between turns.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import uuid

from .config import Settings


def _settings(args: argparse.Namespace) -> Settings:
    return Settings.from_file(args.config)


def _options(args: argparse.Namespace) -> dict:
    options = {k: getattr(args, k) for k in ("locale", "latitude", "longitude", "utc_offset", "date", "method")}
    return {k: v for k, v in options.items() if v is not None}


def _print_response(response, as_json: bool) -> None:
    if as_json:
        print(json.dumps(response.to_dict(), ensure_ascii=False, indent=2, default=str))
        return
    if response.error is not None:
        print(f"error in stage {response.error.stage.value}: {response.error.error_type}: {response.error.message}", file=sys.stderr)
        return
    print(response.text)
    if response.decision is not None:
        print(f"[intent {response.decision.label.value} via {response.decision.source.value}; trace {response.trace_id}]", file=sys.stderr)


def cmd_answer(args: argparse.Namespace) -> int:
    from .service.pipeline import Pipeline

    pipeline = Pipeline.from_settings(_settings(args))
    options = _options(args)
    if args.query:
        response = pipeline.answer(" ".join(args.query), args.conversation_id, options)
        _print_response(response, args.json)
        return 1 if response.error is not None else 0

    conversation_id = args.conversation_id or uuid.uuid4().hex
    print("groundqa interactive session; empty line or Ctrl-D to quit.", file=sys.stderr)
    while True:
        try:
            query = input("> ").strip()
        except EOFError:
            break
        if not query:
            break
        _print_response(pipeline.answer(query, conversation_id, options), args.json)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.api import create_app
    from .service.pipeline import Pipeline

    settings = _settings(args)
    if args.workers is not None:
        settings.job_workers = args.workers
    app = create_app(Pipeline.from_settings(settings))
    uvicorn.run(app, host=args.host, port=args.port, log_level=args.log_level)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    from .errors import NoPositiveCases
    from .evaluation import arg_accuracy, evaluate, load_records, weighted_precision_recall

    records = load_records(args.dataset)
    if args.json:
        report = evaluate(records, by=args.by)
        try:
            report["arg_accuracy"] = float(arg_accuracy(records))
        except NoPositiveCases:
            report["arg_accuracy"] = None
        print(json.dumps(report, indent=2))
    else:
        print(weighted_precision_recall(records).table())
    return 0


def cmd_corpora(args: argparse.Namespace) -> int:
    from .retrieval import corpus_summary, load_corpora, load_corpus

    settings = _settings(args)
    if args.action == "list":
        docs = load_corpora(settings.corpora)
        for name, count in corpus_summary(docs).items():
            print(f"{name:<14}{count:>6}  {settings.corpora.get(name, '')}")
        return 0
    if args.action == "validate":
        paths = args.paths or list(settings.corpora.values())
        failed = 0
        for path in paths:
            try:
                docs = load_corpus(path)
                ids = [d.id for d in docs]
                if len(ids) != len(set(ids)):
                    raise ValueError("duplicate document ids")
                print(f"ok      {path} ({len(docs)} documents)")
            except Exception as exc:  # noqa: BLE001 - report every file
                failed += 1
                print(f"invalid {path}: {exc}")
        return 1 if failed else 0
    if args.action == "show":
        by_id = {d.id: d for d in load_corpora(settings.corpora)}
        for doc_id in args.paths:
            doc = by_id.get(doc_id)
            if doc is None:
                print(f"unknown document id {doc_id}", file=sys.stderr)
                return 1
            print(json.dumps(doc.to_dict(), ensure_ascii=False, indent=2))
        return 0
    raise AssertionError(args.action)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groundqa", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON settings file; GROUNDQA_* environment variables override client endpoints")
    parser.add_argument("-v", "--verbose", action="store_true", help="log pipeline stages")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("answer", help="answer one query, or start an interactive session")
    p.add_argument("query", nargs="*")
    p.add_argument("--conversation-id")
    p.add_argument("--locale", choices=("en", "ar"))
    p.add_argument("--latitude", type=float)
    p.add_argument("--longitude", type=float)
    p.add_argument("--utc-offset", type=float)
    p.add_argument("--date", help="reference date YYYY-MM-DD")
    p.add_argument("--method", help="prayer-time method preset")
    p.add_argument("--json", action="store_true", help="print the full response document")
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--workers", type=int, help="job worker threads (overrides the config)")
    p.add_argument("--log-level", default="info")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("eval", help="score a JSONL file of tool-calling records")
    p.add_argument("dataset")
    p.add_argument("--by", choices=("dataset", "language"), default="dataset")
    p.add_argument("--json", action="store_true", help="JSON report instead of a table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("corpora", help="inspect the JSONL corpora")
    p.add_argument("action", choices=("list", "validate", "show"))
    p.add_argument("paths", nargs="*", help="files for validate, document ids for show")
    p.set_defaults(func=cmd_corpora)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
