from __future__ import annotations

from pathlib import Path

from sheetlint.grid import Cell, CellType, Coordinate, Workbook, Worksheet, scalar_type
from sheetlint.services.formula import parse_formula_a1
from sheetlint.services.ingestion import load_canonical


FIXTURES = Path(__file__).parent / "fixtures"
RUNNING_EXAMPLE = FIXTURES / "running_example.json"
PATTERN_CORPUS = FIXTURES / "pattern_corpus"


def make_cell(sheet: str, addr: str, value) -> Cell:
    """Strings starting with '=' become formulas; anything else is a constant."""
    coord = Coordinate.parse(addr)
    if isinstance(value, str) and value.startswith("="):
        return Cell(sheet, coord, CellType.FORMULA, formula=parse_formula_a1(value, coord, sheet))
    return Cell(sheet, coord, scalar_type(value), literal=value)


def make_workbook(sheets: dict[str, dict[str, object]]) -> Workbook:
    out = []
    for name, cells in sheets.items():
        built = {c.coord: c for c in (make_cell(name, addr, v) for addr, v in cells.items())}
        out.append(Worksheet(name=name, cells=built))
    return Workbook(sheets=tuple(out))


def running_example() -> Workbook:
    return load_canonical(RUNNING_EXAMPLE)


def with_value(workbook: Workbook, sheet: str, addr: str, value) -> Workbook:
    ws = workbook.sheet(sheet)
    return workbook.replace_sheet(ws.with_cell(make_cell(sheet, addr, value)))


def without(workbook: Workbook, sheet: str, addr: str) -> Workbook:
    ws = workbook.sheet(sheet)
    return workbook.replace_sheet(ws.without_cell(Coordinate.parse(addr)))


def constant_total_d4(workbook: Workbook) -> Workbook:
    """Total!D4 overwritten by a constant."""
    return with_value(workbook, "Total", "D4", 18)


def header_d3_removed(workbook: Workbook) -> Workbook:
    return without(workbook, "Department1", "D3")


def coords(*addrs: str) -> set[Coordinate]:
    return {Coordinate.parse(a) for a in addrs}


def rect_coords(rng: str) -> set[Coordinate]:
    start, end = rng.split(":")
    a, b = Coordinate.parse(start), Coordinate.parse(end)
    return {Coordinate(col=c, row=r) for c in range(a.col, b.col + 1) for r in range(a.row, b.row + 1)}
