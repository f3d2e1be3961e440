from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from pydantic import ValidationError

from sheetlint import __version__
from sheetlint.grid import Workbook
from sheetlint.schemas import EvalConfigDocument, ThresholdsDocument
from sheetlint.services.evaluation import ConfigError, EvalConfig, evaluate_corpus, parse_detectors, smell_config
from sheetlint.services.ingestion import FILTERS, IngestionError, load_workbook, preprocess_corpus
from sheetlint.services.rendering import render_model, render_reports, render_summary
from sheetlint.services.smells import RISK_ORDER, Risk, SmellConfig, SmellKind, detect_smells
from sheetlint.services.structure import describe_model, infer_structure
from sheetlint.settings import settings


log = logging.getLogger("sheetlint")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_GATE = 3


def _dumps(data) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def _fail(message: str, code: int = EXIT_ERROR) -> int:
    print(f"sheetlint: {message}", file=sys.stderr)
    return code


def _load(path: str) -> Workbook:
    workbook = load_workbook(path)
    for w in workbook.warnings:
        print(f"sheetlint: warning: {w.sheet}!{w.addr}: {w.kind}: {w.message}", file=sys.stderr)
    return workbook


def _read_document(path: str, model):
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: {e}") from e
    try:
        return model.model_validate_json(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e


def cmd_preprocess(args: argparse.Namespace) -> int:
    try:
        report = preprocess_corpus(args.dir, args.filter)
    except IngestionError as e:
        return _fail(str(e))
    text = _dumps(report.model_dump(mode="json"))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
        print(
            f"{len(report.accepted)} of {report.total_files} files accepted "
            f"(unreadable {report.excluded_unreadable}, unprocessable {report.excluded_unprocessable}, "
            f"no formulas {report.excluded_no_formulas}); report written to {args.out}"
        )
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        workbook = _load(args.file)
    except IngestionError as e:
        return _fail(str(e))
    model = describe_model(infer_structure(workbook))
    sys.stdout.write(_dumps(model) if args.format == "json" else render_model(model))
    return EXIT_OK


def cmd_smells(args: argparse.Namespace) -> int:
    try:
        kinds = parse_detectors(args.detectors.split(",")) if args.detectors else tuple(SmellKind)
    except ConfigError as e:
        return _fail(str(e), EXIT_USAGE)
    try:
        if args.thresholds:
            doc = _read_document(args.thresholds, ThresholdsDocument)
            config = smell_config(doc.thresholds, doc.options)
        else:
            config = SmellConfig()
    except ConfigError as e:
        return _fail(str(e))
    try:
        workbook = _load(args.file)
    except IngestionError as e:
        return _fail(str(e))

    reports = detect_smells(workbook, infer_structure(workbook), kinds, config)
    data = [r.to_dict() for r in reports]
    sys.stdout.write(_dumps(data) if args.format == "json" else render_reports(data))

    if args.fail_on:
        gate = RISK_ORDER[Risk(args.fail_on)]
        if any(r.risk is not None and RISK_ORDER[r.risk] >= gate for r in reports):
            log.info("smells_gate fail_on=%s reports=%s", args.fail_on, len(reports))
            return EXIT_GATE
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        doc = _read_document(args.config, EvalConfigDocument) if args.config else EvalConfigDocument()
        if args.out:
            doc = doc.model_copy(update={"output_dir": args.out})
        cfg = EvalConfig.from_document(doc, corpus=args.dir)
    except ConfigError as e:
        return _fail(str(e))
    try:
        result = evaluate_corpus(cfg)
    except IngestionError as e:
        return _fail(str(e))
    sys.stdout.write(render_summary(result.summary.to_dict()))
    print(f"outputs written to {result.output_dir}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("sheetlint.main:app", host=args.host, port=args.port, log_level=settings.log_level.lower())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sheetlint", description="Static analysis of spreadsheet workbooks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("preprocess", help="Filter a corpus directory")
    p.add_argument("dir", help="Corpus directory (searched recursively)")
    p.add_argument("--filter", choices=FILTERS, default="complete", help="Filtering rules to apply")
    p.add_argument("--out", help="Write the report to this path instead of stdout")
    p.set_defaults(handler=cmd_preprocess)

    p = subparsers.add_parser("analyze", help="Print the inferred structure of one workbook")
    p.add_argument("file", help="Workbook file (.json or .xlsx)")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(handler=cmd_analyze)

    p = subparsers.add_parser("smells", help="Run smell detectors on one workbook")
    p.add_argument("file", help="Workbook file (.json or .xlsx)")
    p.add_argument("--detectors", help="Comma-separated detector names (default: all)")
    p.add_argument("--thresholds", help="JSON thresholds/options config")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--fail-on", choices=[Risk.LOW.value, Risk.HIGH.value], help="Exit with status 3 at this risk")
    p.set_defaults(handler=cmd_smells)

    p = subparsers.add_parser("evaluate", help="Measure every detector over a corpus")
    p.add_argument("dir", help="Corpus directory")
    p.add_argument("--config", help="JSON evaluation config")
    p.add_argument("--out", help="Output directory (overrides the config)")
    p.set_defaults(handler=cmd_evaluate)

    p = subparsers.add_parser("serve", help="Run the HTTP API")
    p.add_argument("--host", default=settings.host)
    p.add_argument("--port", type=int, default=settings.port)
    p.set_defaults(handler=cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.log_level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    try:
        return args.handler(args)
    except Exception as e:  # noqa: BLE001
        log.exception("command_failed command=%s", args.command)
        return _fail(f"{type(e).__name__}: {e}")
