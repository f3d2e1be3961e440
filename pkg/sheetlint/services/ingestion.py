from __future__ import annotations

import datetime as dt
import json
import logging
from pathlib import Path
from typing import Literal

from pydantic import ValidationError

from sheetlint.grid import Cell, CellType, Coordinate, LoadWarning, Workbook, Worksheet, scalar_type
from sheetlint.schemas import SCHEMA_VERSION, CellDocument, PreprocessReport, SheetDocument, WorkbookDocument
from sheetlint.services.formula import FormulaParseError, parse_formula_a1, render_a1
from sheetlint.settings import settings


log = logging.getLogger("sheetlint")

CANONICAL_SUFFIXES = (".json",)
XLSX_SUFFIXES = (".xlsx", ".xlsm")

FilterName = Literal["complete", "readable-only", "has-formulas"]
FILTERS: tuple[FilterName, ...] = ("complete", "readable-only", "has-formulas")

_FORMULA_WARNINGS = ("unsupported-formula", "array-formula")


class IngestionError(RuntimeError):
    def __init__(self, message: str, *, sheet: str | None = None, addr: str | None = None) -> None:
        super().__init__(message)
        self.sheet = sheet
        self.addr = addr


class UnreadableWorkbookError(IngestionError):
    pass


class UnprocessableWorkbookError(IngestionError):
    pass


def _validation_message(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        loc = ".".join(str(x) for x in err.get("loc", ()))
        parts.append(f"{loc}: {err.get('msg')}" if loc else str(err.get("msg")))
    return "; ".join(parts)


def build_workbook(doc: WorkbookDocument, source_path: str = "") -> Workbook:
    sheets = []
    for sheet_doc in doc.sheets:
        cells: dict[Coordinate, Cell] = {}
        for cell_doc in sheet_doc.cells:
            coord = Coordinate.parse(cell_doc.addr)
            formula = None
            if cell_doc.type is CellType.FORMULA:
                try:
                    formula = parse_formula_a1(cell_doc.formula or "", coord, sheet_doc.name)
                except FormulaParseError as e:
                    raise UnprocessableWorkbookError(
                        f"{sheet_doc.name}!{cell_doc.addr}: {e}", sheet=sheet_doc.name, addr=cell_doc.addr
                    ) from e
            cells[coord] = Cell(
                sheet=sheet_doc.name,
                coord=coord,
                cell_type=cell_doc.type,
                literal=cell_doc.value,
                formula=formula,
                cached_value=cell_doc.cached,
            )
        sheets.append(Worksheet(name=sheet_doc.name, cells=cells))
    return Workbook(sheets=tuple(sheets), source_path=source_path)


def load_canonical(path: str | Path) -> Workbook:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise UnreadableWorkbookError(f"{path}: {e}") from e
    try:
        doc = WorkbookDocument.model_validate_json(raw)
    except ValidationError as e:
        raise UnreadableWorkbookError(f"{path}: {_validation_message(e)}") from e
    return build_workbook(doc, source_path=str(path))


def serialize(workbook: Workbook) -> WorkbookDocument:
    sheets = []
    for ws in workbook.sheets:
        cells = []
        for cell in ws.iter_cells():
            cells.append(
                CellDocument(
                    addr=cell.coord.a1,
                    type=cell.cell_type,
                    value=cell.literal,
                    formula=None if cell.formula is None else "=" + render_a1(cell.formula, cell.coord),
                    cached=cell.cached_value,
                )
            )
        sheets.append(SheetDocument(name=ws.name, cells=cells))
    return WorkbookDocument(schema_version=SCHEMA_VERSION, sheets=sheets)


def dumps_canonical(workbook: Workbook) -> str:
    data = serialize(workbook).model_dump(mode="json", exclude_none=True)
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def dump_canonical(workbook: Workbook, path: str | Path) -> None:
    Path(path).write_text(dumps_canonical(workbook), encoding="utf-8", newline="\n")


def _xlsx_scalar(value):
    if isinstance(value, (dt.datetime, dt.date, dt.time)):
        from openpyxl.utils.datetime import to_excel

        return to_excel(value)
    if isinstance(value, (bool, int, float, str)):
        return value
    return None if value is None else str(value)


def load_xlsx(path: str | Path) -> Workbook:
    """Read an XLSX archive: formulas from one pass, cached values from a data-only pass."""
    if not settings.enable_xlsx:
        raise UnreadableWorkbookError("xlsx support is disabled (SHEETLINT_ENABLE_XLSX=0)")
    try:
        from openpyxl import load_workbook as open_xlsx
        from openpyxl.worksheet.formula import ArrayFormula
    except ImportError as e:  # pragma: no cover
        raise UnreadableWorkbookError("openpyxl is not installed") from e

    path = Path(path)
    try:
        formulas_book = open_xlsx(path, data_only=False)
        values_book = open_xlsx(path, data_only=True)
    except Exception as e:  # noqa: BLE001
        raise UnreadableWorkbookError(f"{path}: {e}") from e

    warnings: list[LoadWarning] = []
    sheets = []
    for ws in formulas_book.worksheets:
        values = values_book[ws.title]
        cells: dict[Coordinate, Cell] = {}
        for row in ws.iter_rows():
            for xl in row:
                raw = xl.value
                if raw is None:
                    continue
                coord = Coordinate(col=xl.column, row=xl.row)
                cached = _xlsx_scalar(values.cell(row=xl.row, column=xl.column).value)
                text = raw.text if isinstance(raw, ArrayFormula) else raw
                if isinstance(raw, ArrayFormula) or xl.data_type == "f":
                    problem = "array-formula" if isinstance(raw, ArrayFormula) else None
                    formula = None
                    if problem is None:
                        try:
                            formula = parse_formula_a1(str(text), coord, ws.title)
                        except FormulaParseError as e:
                            problem = "unsupported-formula"
                            log.debug("xlsx_downgrade cell=%s!%s error=%s", ws.title, coord.a1, e)
                    if formula is not None:
                        cells[coord] = Cell(ws.title, coord, CellType.FORMULA, formula=formula, cached_value=cached)
                        continue
                    warnings.append(LoadWarning(ws.title, coord.a1, problem, f"downgraded {text!r} to its cached value"))
                    if cached is not None:
                        cells[coord] = Cell(ws.title, coord, scalar_type(cached), literal=cached)
                    continue
                literal = _xlsx_scalar(raw)
                kind = CellType.ERROR if xl.data_type == "e" else scalar_type(literal)
                cells[coord] = Cell(ws.title, coord, kind, literal=literal)
        sheets.append(Worksheet(name=ws.title, cells=cells))
    return Workbook(sheets=tuple(sheets), source_path=str(path), warnings=tuple(warnings))


def load_workbook(path: str | Path) -> Workbook:
    suffix = Path(path).suffix.lower()
    if suffix in CANONICAL_SUFFIXES:
        return load_canonical(path)
    if suffix in XLSX_SUFFIXES:
        return load_xlsx(path)
    raise UnreadableWorkbookError(f"{path}: unsupported file type {suffix or '<none>'}")


def has_formulas(workbook: Workbook) -> bool:
    if any(w.kind in _FORMULA_WARNINGS for w in workbook.warnings):
        return True
    return any(cell.formula is not None for cell in workbook.iter_cells())


def candidate_files(directory: str | Path) -> list[Path]:
    root = Path(directory)
    return sorted(
        p for p in root.rglob("*") if p.is_file() and not any(part.startswith(".") for part in p.relative_to(root).parts)
    )


def classify_file(path: Path, filter: FilterName) -> str | None:
    """Exclusion reason for one file under a filter, or None when accepted."""
    try:
        workbook = load_workbook(path)
    except UnprocessableWorkbookError:
        return "unprocessable" if filter == "complete" else None
    except IngestionError:
        return "unreadable"
    if filter == "complete" and any(w.kind in _FORMULA_WARNINGS for w in workbook.warnings):
        return "unprocessable"
    if filter in ("complete", "has-formulas") and not has_formulas(workbook):
        return "no-formulas"
    return None


def preprocess_corpus(directory: str | Path, filter: FilterName = "complete") -> PreprocessReport:
    root = Path(directory)
    if not root.is_dir():
        raise IngestionError(f"missing directory: {directory}")
    if filter not in FILTERS:
        raise IngestionError(f"unknown filter: {filter}")

    counts = {"unreadable": 0, "unprocessable": 0, "no-formulas": 0}
    accepted: list[str] = []
    reasons: dict[str, str] = {}
    files = candidate_files(root)
    for path in files:
        reason = classify_file(path, filter)
        if reason is None:
            accepted.append(str(path))
        else:
            counts[reason] += 1
            reasons[str(path)] = reason

    report = PreprocessReport(
        directory=str(root),
        filter=filter,
        total_files=len(files),
        excluded_unreadable=counts["unreadable"],
        excluded_unprocessable=counts["unprocessable"],
        excluded_no_formulas=counts["no-formulas"],
        accepted=accepted,
        reasons=reasons,
    )
    log.info(
        "preprocess_done dir=%s filter=%s total=%s accepted=%s",
        root,
        filter,
        report.total_files,
        len(report.accepted),
    )
    return report
