"""Batch corpus evaluation.

Every accepted file is loaded, turned into a structure model and measured by the selected
detectors inside a bounded worker pool. Files that exceed the per-file limit or fail leave no
records behind. Results are written as per-kind CSVs, quartile series and a summary.
"""

from __future__ import annotations

import asyncio
import csv
import datetime as dt
import json
import logging
import re
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Awaitable, Callable, Iterable, Sequence

from sheetlint.schemas import EvalConfigDocument
from sheetlint.services.ingestion import FILTERS, FilterName, IngestionError, candidate_files, load_workbook, preprocess_corpus
from sheetlint.services.rendering import render_summary
from sheetlint.services.smells import (
    DEFAULT_BANDS,
    PATTERN_FINDER_VARIANTS,
    Band,
    PatternFinderVariant,
    PatternOrientation,
    SmellConfig,
    SmellKind,
    ThresholdError,
    Thresholds,
    measure,
)
from sheetlint.services.structure import infer_structure
from sheetlint.settings import settings


log = logging.getLogger("sheetlint")

RECORD_HEADER = ("kind", "file", "worksheet", "subject", "metric_value")
QUARTILE_HEADER = ("kind", "percentile", "value")
OUTCOME_HEADER = ("file", "status", "seconds", "error")

THRESHOLD_KEYS = frozenset(DEFAULT_BANDS) | {"overburdened-reference-groups"}


class ConfigError(ValueError):
    pass


class QuartileError(ValueError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    corpus: Path
    detectors: tuple[SmellKind, ...] = tuple(SmellKind)
    timeout_seconds: float = 300.0
    smell: SmellConfig = SmellConfig()
    output_dir: Path = Path("./eval-out")
    workers: int = settings.threads
    preprocess_filter: FilterName | None = "complete"
    quartile_step: int = 1
    database_url: str | None = None

    def __post_init__(self) -> None:
        if not self.timeout_seconds > 0:
            raise ConfigError(f"timeout must be positive, got {self.timeout_seconds}")
        if self.workers < 0:
            raise ConfigError(f"workers must not be negative, got {self.workers}")
        if not 1 <= self.quartile_step <= 100:
            raise ConfigError(f"quartile step must be within 1..100, got {self.quartile_step}")
        if self.preprocess_filter is not None and self.preprocess_filter not in FILTERS:
            raise ConfigError(f"unknown preprocess filter: {self.preprocess_filter}")

    @property
    def thresholds(self) -> Thresholds:
        return self.smell.thresholds

    @classmethod
    def from_document(cls, doc: EvalConfigDocument, corpus: str | Path | None = None) -> EvalConfig:
        root = corpus or doc.corpus
        if not root:
            raise ConfigError("no corpus directory given")
        return cls(
            corpus=Path(root),
            detectors=parse_detectors(doc.detectors) if doc.detectors is not None else tuple(SmellKind),
            timeout_seconds=doc.timeout_seconds if doc.timeout_seconds is not None else settings.timeout_seconds,
            smell=smell_config(doc.thresholds, doc.options),
            output_dir=Path(doc.output_dir),
            workers=doc.workers if doc.workers is not None else settings.threads,
            preprocess_filter=doc.preprocess_filter,
            quartile_step=doc.quartile_step,
            database_url=doc.database_url,
        )


def parse_detectors(names: Iterable[str]) -> tuple[SmellKind, ...]:
    kinds = []
    for name in names:
        try:
            kinds.append(SmellKind(name.strip()))
        except ValueError as e:
            valid = ", ".join(k.value for k in SmellKind)
            raise ConfigError(f"unknown detector {name!r}; valid names: {valid}") from e
    if not kinds:
        raise ConfigError("empty detector selection")
    return tuple(dict.fromkeys(kinds))


def smell_config(thresholds: dict, options) -> SmellConfig:
    """Build detector settings from the thresholds/options parts of a config document."""
    overrides: dict[str, Band] = {}
    for key, band in thresholds.items():
        if key not in THRESHOLD_KEYS:
            raise ConfigError(f"unknown threshold key {key!r}; valid keys: {', '.join(sorted(THRESHOLD_KEYS))}")
        try:
            overrides[key] = Band(low=band.low, high=band.high, medium=band.medium)
        except ThresholdError as e:
            raise ConfigError(f"{key}: {e}") from e
    return SmellConfig(
        thresholds=Thresholds().merged(overrides),
        pattern_variant=PatternFinderVariant(
            orientation=PatternOrientation(options.pattern_orientation),
            include_border=options.pattern_include_border,
            evaluated_types=options.pattern_evaluated_types,
        ),
        group_pattern_evaluated=options.group_pattern_evaluated,
        overburdened_metric=options.overburdened_metric,
        missing_header_levels=options.missing_header_levels,
        inconsistency_mode=options.inconsistency_mode,
    )


@dataclass(frozen=True)
class MetricRecord:
    kind: str
    file: str
    worksheet: str
    subject: str
    metric_value: float
    threshold_key: str | None = field(default=None, compare=False)


class OutcomeStatus(str, Enum):
    COMPLETED = "completed"
    TIMED_OUT = "timed-out"
    ERRORED = "errored"
    UNREADABLE = "unreadable"


@dataclass(frozen=True)
class Outcome:
    status: OutcomeStatus
    value: Any = None
    error: str | None = None
    seconds: float = 0.0


async def run_with_timeout(task: Awaitable[Any], limit: float) -> Outcome:
    if not limit > 0:
        raise ValueError(f"limit must be positive, got {limit}")
    started = time.perf_counter()
    try:
        value = await asyncio.wait_for(task, timeout=limit)
    except asyncio.TimeoutError:
        return Outcome(OutcomeStatus.TIMED_OUT, seconds=time.perf_counter() - started)
    except IngestionError as e:
        return Outcome(OutcomeStatus.UNREADABLE, error=str(e), seconds=time.perf_counter() - started)
    except Exception as e:  # noqa: BLE001
        return Outcome(OutcomeStatus.ERRORED, error=f"{type(e).__name__}: {e}", seconds=time.perf_counter() - started)
    return Outcome(OutcomeStatus.COMPLETED, value=value, seconds=time.perf_counter() - started)


def analyze_file(path: str, kinds: Sequence[SmellKind], config: SmellConfig) -> list[MetricRecord]:
    """Load, model and measure one file. Runs inside a worker process."""
    workbook = load_workbook(path)
    model = infer_structure(workbook)
    return [
        MetricRecord(m.tag, path, m.worksheet, m.subject, m.value, m.threshold_key)
        for m in measure(workbook, model, kinds, config)
    ]


@dataclass(frozen=True)
class QuartileSeries:
    kind: str
    points: tuple[tuple[int, float], ...]


def quartile_series(values: Sequence[float], step: int = 1, kind: str = "") -> QuartileSeries:
    """Point at percentile p is the smallest value v with at least p% of the values <= v."""
    if not values:
        raise QuartileError("empty input")
    if not 1 <= step <= 100:
        raise QuartileError(f"step must be within 1..100, got {step}")
    ordered = sorted(values)
    n = len(ordered)
    percentiles = list(range(step, 101, step))
    if percentiles[-1] != 100:
        percentiles.append(100)
    points = []
    for p in percentiles:
        rank = max(1, -(-p * n // 100))
        points.append((p, ordered[rank - 1]))
    return QuartileSeries(kind=kind, points=tuple(points))


@dataclass(frozen=True)
class KindSummary:
    entities: int
    total: float
    average: float
    median: float
    entities_gt0: int
    pct_gt0: float
    average_gt0: float
    detections_low: int | None = None
    detections_medium: int | None = None
    detections_high: int | None = None


def summarize_kind(values: Sequence[float], band: Band | None = None) -> KindSummary:
    positive = [v for v in values if v > 0]
    n = len(values)
    return KindSummary(
        entities=n,
        total=sum(values),
        average=statistics.fmean(values) if n else 0.0,
        median=statistics.median(values) if n else 0.0,
        entities_gt0=len(positive),
        pct_gt0=100.0 * len(positive) / n if n else 0.0,
        average_gt0=statistics.fmean(positive) if positive else 0.0,
        detections_low=None if band is None else sum(1 for v in values if v >= band.low),
        detections_medium=None if band is None or band.medium is None else sum(1 for v in values if v >= band.medium),
        detections_high=None if band is None else sum(1 for v in values if v >= band.high),
    )


@dataclass(frozen=True)
class FileOutcomeRow:
    file: str
    status: OutcomeStatus
    seconds: float
    records: int = 0
    error: str | None = None


@dataclass(frozen=True)
class EvaluationSummary:
    corpus: str
    files_total: int
    files_accepted: int
    excluded: dict[str, int]
    outcomes: dict[str, int]
    kinds: dict[str, KindSummary]
    per_file: dict[str, dict[str, float]]

    def to_dict(self) -> dict:
        return {
            "corpus": self.corpus,
            "files_total": self.files_total,
            "files_accepted": self.files_accepted,
            "excluded": dict(self.excluded),
            "outcomes": dict(self.outcomes),
            "kinds": {tag: asdict(k) for tag, k in self.kinds.items()},
            "per_file": {f: dict(v) for f, v in self.per_file.items()},
        }


@dataclass(frozen=True)
class EvaluationResult:
    summary: EvaluationSummary
    records: tuple[MetricRecord, ...]
    outcomes: tuple[FileOutcomeRow, ...]
    output_dir: Path
    run_id: int | None = None


def summarize(
    corpus: str,
    files_total: int,
    excluded: dict[str, int],
    records: Sequence[MetricRecord],
    outcomes: Sequence[FileOutcomeRow],
    thresholds: Thresholds,
) -> EvaluationSummary:
    by_kind: dict[str, list[MetricRecord]] = {}
    per_file: dict[str, dict[str, float]] = {}
    for r in records:
        by_kind.setdefault(r.kind, []).append(r)
        totals = per_file.setdefault(r.file, {})
        totals[r.kind] = totals.get(r.kind, 0) + r.metric_value

    kinds = {}
    for tag in sorted(by_kind):
        rows = by_kind[tag]
        key = rows[0].threshold_key
        band = thresholds.bands.get(key) if key else None
        kinds[tag] = summarize_kind([r.metric_value for r in rows], band)

    counts = {s.value: 0 for s in OutcomeStatus}
    for o in outcomes:
        counts[o.status.value] += 1
    return EvaluationSummary(
        corpus=corpus,
        files_total=files_total,
        files_accepted=len(outcomes),
        excluded=dict(excluded),
        outcomes=counts,
        kinds=kinds,
        per_file={f: dict(sorted(per_file[f].items())) for f in sorted(per_file)},
    )


def _file_stem(tag: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", tag).strip("_")


def _fmt(value: float) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_outputs(result: EvaluationResult, kinds: Iterable[str], step: int) -> None:
    out = result.output_dir
    out.mkdir(parents=True, exist_ok=True)
    by_kind: dict[str, list[MetricRecord]] = {tag: [] for tag in kinds}
    for r in result.records:
        by_kind.setdefault(r.kind, []).append(r)

    for tag, rows in sorted(by_kind.items()):
        stem = _file_stem(tag)
        _write_csv(
            out / "records" / f"{stem}.csv",
            RECORD_HEADER,
            ((r.kind, r.file, r.worksheet, r.subject, _fmt(r.metric_value)) for r in rows),
        )
        points = quartile_series([r.metric_value for r in rows], step, tag).points if rows else ()
        _write_csv(out / "quartiles" / f"{stem}.csv", QUARTILE_HEADER, ((tag, p, _fmt(v)) for p, v in points))

    _write_csv(
        out / "outcomes.csv",
        OUTCOME_HEADER,
        ((o.file, o.status.value, f"{o.seconds:.3f}", o.error or "") for o in result.outcomes),
    )
    summary = result.summary.to_dict()
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, ensure_ascii=False, sort_keys=False) + "\n", encoding="utf-8", newline="\n"
    )
    (out / "summary.txt").write_text(render_summary(summary), encoding="utf-8", newline="\n")


def expected_tags(kinds: Iterable[SmellKind]) -> list[str]:
    """Record tags produced for a detector selection, including the variants measured."""
    tags = []
    for kind in kinds:
        if kind is SmellKind.BASELINE_PATTERN_FINDER:
            tags.extend(f"{kind.value}[{v.tag}]" for v in PATTERN_FINDER_VARIANTS)
        elif kind is SmellKind.GROUP_PATTERN_FINDER:
            tags.extend(f"{kind.value}[{m}]" for m in ("raw", "evaluated"))
        elif kind is SmellKind.OVERBURDENED_WORKSHEET:
            tags.extend(f"{kind.value}[{m}]" for m in ("blocks", "groups", "reference-groups"))
        else:
            tags.append(kind.value)
    return tags


class _WorkerPool:
    """Process pool that is replaced after a timeout; retired pools have their processes terminated on close."""

    def __init__(self, workers: int) -> None:
        self.width = max(1, workers)
        self._pool = ProcessPoolExecutor(max_workers=self.width)
        self._retired: list[ProcessPoolExecutor] = []

    def submit(self, fn: Callable[..., Any], *args: Any) -> Awaitable[Any]:
        loop = asyncio.get_running_loop()
        return loop.run_in_executor(self._pool, fn, *args)

    def recycle(self) -> None:
        self._retired.append(self._pool)
        self._pool = ProcessPoolExecutor(max_workers=self.width)
        log.info("worker_pool_recycled width=%s", self.width)

    def close(self) -> None:
        for pool in self._retired:
            for proc in list((getattr(pool, "_processes", None) or {}).values()):
                proc.terminate()
            pool.shutdown(wait=False, cancel_futures=True)
        self._pool.shutdown(wait=True)


def _relative(path: str, root: Path) -> str:
    try:
        return Path(path).relative_to(root).as_posix()
    except ValueError:
        return Path(path).as_posix()


async def evaluate_corpus_async(
    cfg: EvalConfig,
    analyzer: Callable[[str, Sequence[SmellKind], SmellConfig], list[MetricRecord]] = analyze_file,
) -> EvaluationResult:
    if not cfg.corpus.is_dir():
        raise IngestionError(f"missing directory: {cfg.corpus}")
    started_at = dt.datetime.now(dt.timezone.utc)

    excluded: dict[str, int] = {}
    if cfg.preprocess_filter is not None:
        report = preprocess_corpus(cfg.corpus, cfg.preprocess_filter)
        files = list(report.accepted)
        files_total = report.total_files
        excluded = {
            "unreadable": report.excluded_unreadable,
            "unprocessable": report.excluded_unprocessable,
            "no-formulas": report.excluded_no_formulas,
        }
    else:
        files = [str(p) for p in candidate_files(cfg.corpus)]
        files_total = len(files)

    pool = _WorkerPool(cfg.workers)
    sem = asyncio.Semaphore(pool.width)

    async def one(path: str) -> Outcome:
        async with sem:
            outcome = await run_with_timeout(pool.submit(analyzer, path, cfg.detectors, cfg.smell), cfg.timeout_seconds)
        if outcome.status is OutcomeStatus.TIMED_OUT:
            pool.recycle()
            log.warning("evaluate_timeout file=%s limit=%s", path, cfg.timeout_seconds)
        elif outcome.status is not OutcomeStatus.COMPLETED:
            log.warning("evaluate_skip file=%s status=%s error=%s", path, outcome.status.value, outcome.error)
        return outcome

    try:
        outcomes = await asyncio.gather(*(one(p) for p in files))
    finally:
        pool.close()

    records: list[MetricRecord] = []
    rows: list[FileOutcomeRow] = []
    for path, outcome in zip(files, outcomes):
        name = _relative(path, cfg.corpus)
        file_records = []
        if outcome.status is OutcomeStatus.COMPLETED:
            file_records = [
                MetricRecord(r.kind, name, r.worksheet, r.subject, r.metric_value, r.threshold_key) for r in outcome.value
            ]
            records.extend(file_records)
        rows.append(FileOutcomeRow(name, outcome.status, outcome.seconds, len(file_records), outcome.error))

    summary = summarize(str(cfg.corpus), files_total, excluded, records, rows, cfg.thresholds)
    result = EvaluationResult(summary=summary, records=tuple(records), outcomes=tuple(rows), output_dir=cfg.output_dir)
    write_outputs(result, expected_tags(cfg.detectors), cfg.quartile_step)

    run_id = None
    if cfg.database_url:
        run_id = await record_run(cfg, result, started_at, dt.datetime.now(dt.timezone.utc))
    log.info(
        "evaluate_done corpus=%s files=%s completed=%s timed_out=%s records=%s",
        cfg.corpus,
        len(files),
        summary.outcomes[OutcomeStatus.COMPLETED.value],
        summary.outcomes[OutcomeStatus.TIMED_OUT.value],
        len(records),
    )
    return EvaluationResult(summary, result.records, result.outcomes, result.output_dir, run_id)


def evaluate_corpus(cfg: EvalConfig) -> EvaluationResult:
    return asyncio.run(evaluate_corpus_async(cfg))


async def record_run(
    cfg: EvalConfig, result: EvaluationResult, started_at: dt.datetime, finished_at: dt.datetime
) -> int | None:
    from sheetlint.db import create_engine, init_db, session_scope
    from sheetlint.models import EvaluationRun, FileOutcome

    counts = result.summary.outcomes
    engine = None
    try:
        engine = create_engine(cfg.database_url)
        await init_db(engine)
        async with session_scope(engine) as session:
            run = EvaluationRun(
                corpus=str(cfg.corpus),
                detectors=",".join(k.value for k in cfg.detectors),
                started_at=started_at,
                finished_at=finished_at,
                files_total=result.summary.files_total,
                completed=counts[OutcomeStatus.COMPLETED.value],
                timed_out=counts[OutcomeStatus.TIMED_OUT.value],
                errored=counts[OutcomeStatus.ERRORED.value],
                unreadable=counts[OutcomeStatus.UNREADABLE.value],
                records=len(result.records),
            )
            run.outcomes = [
                FileOutcome(file=o.file, status=o.status.value, seconds=o.seconds, records=o.records, error=o.error)
                for o in result.outcomes
            ]
            session.add(run)
            await session.commit()
            return run.id
    except Exception as e:  # noqa: BLE001
        log.warning("run_log_failed url=%s err=%s", cfg.database_url, e)
        return None
    finally:
        if engine is not None:
            await engine.dispose()
