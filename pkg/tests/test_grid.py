from __future__ import annotations

import pytest

from sheetlint.grid import (
    Cell,
    CellType,
    Coordinate,
    GridError,
    Rect,
    Workbook,
    Worksheet,
    area,
    cell_type,
    column_index,
    column_letters,
    connected,
    describe_cells,
    neighbors,
)
from tests.support import coords, make_cell, rect_coords


@pytest.mark.parametrize(
    "addr, col, row",
    [("A1", 1, 1), ("B5", 2, 5), ("Z99", 26, 99), ("AA10", 27, 10), ("$C$3", 3, 3), ("XFD1048576", 16384, 1048576)],
)
def test_parse_address(addr, col, row):
    assert Coordinate.parse(addr) == Coordinate(col=col, row=row)


@pytest.mark.parametrize("addr", ["", "A0", "1A", "A-1", "ABCD1", "B 5"])
def test_parse_address_rejects_garbage(addr):
    with pytest.raises(GridError):
        Coordinate.parse(addr)


def test_column_letters_round_trip():
    for index in (1, 26, 27, 52, 702, 703, 16384):
        assert column_index(column_letters(index)) == index


def test_coordinates_sort_row_major():
    cells = [Coordinate.parse(a) for a in ("B1", "A2", "A1", "C1")]
    assert [c.a1 for c in sorted(cells)] == ["A1", "B1", "C1", "A2"]


def test_coordinate_rejects_zero():
    with pytest.raises(GridError):
        Coordinate(col=0, row=1)


@pytest.mark.parametrize(
    "addr, expected",
    [
        ("B5", {"B4", "B6", "A5", "C5"}),
        ("A1", {"A2", "B1"}),
        ("C3", {"C2", "C4", "B3", "D3"}),
    ],
)
def test_neighbors(addr, expected):
    assert neighbors(Coordinate.parse(addr)) == coords(*expected)


def test_neighbors_of_a_cell(example):
    cell = example.cell("Investment", Coordinate.parse("B5"))
    assert neighbors(cell, example.sheet("Investment")) == coords("B4", "B6", "A5", "C5")


def test_connected():
    assert connected(coords("B4"))
    assert connected(coords("A1", "A2", "B2"))
    assert not connected(coords("A1", "B2"))
    assert connected(rect_coords("A4:E7"))


def test_connected_rejects_empty_set():
    with pytest.raises(GridError, match="empty cell set"):
        connected(set())


def test_area():
    assert area(coords("A3", "B4", "C2")) == rect_coords("A2:C4")
    assert area(coords("B4")) == coords("B4")
    assert area(coords("A1", "C1")) == coords("A1", "B1", "C1")
    with pytest.raises(GridError, match="empty cell set"):
        area(set())


def test_cell_type(example):
    ws = example.sheet("Department1")
    assert cell_type(ws.get(Coordinate.parse("F4"))) is CellType.FORMULA
    assert cell_type(ws.get(Coordinate.parse("Z40"))) is CellType.EMPTY
    assert cell_type(make_cell("S", "A1", "Q1")) is CellType.STRING
    assert cell_type(make_cell("S", "A1", True)) is CellType.BOOLEAN
    assert cell_type(make_cell("S", "A1", "#DIV/0!")) is CellType.ERROR


def test_cell_rejects_formula_type_mismatch():
    with pytest.raises(GridError):
        Cell("S", Coordinate.parse("A1"), CellType.FORMULA, literal=1)


def test_worksheet_rejects_empty_cells():
    coord = Coordinate.parse("A1")
    with pytest.raises(GridError):
        Worksheet(name="S", cells={coord: Cell("S", coord, CellType.EMPTY)})


def test_workbook_rejects_duplicate_sheet_names():
    with pytest.raises(GridError):
        Workbook(sheets=(Worksheet(name="S"), Worksheet(name="S")))


def test_worksheet_bounds(example):
    assert example.sheet("Investment").bounds == Coordinate.parse("E11")
    assert Worksheet(name="blank").bounds is None
    assert example.sheet("Investment").used_rect.a1 == "A1:E11"
    assert Worksheet(name="blank").used_rect is None


def rect(rng: str) -> Rect:
    start, end = rng.split(":")
    return Rect(Coordinate.parse(start), Coordinate.parse(end))


@pytest.mark.parametrize(
    "area_a1, limit, expected",
    [
        ("A1:A1048576", "A1:E11", "A1:A11"),
        ("C3:XFD1048576", "A1:E11", "C3:E11"),
        ("B2:C3", "A1:E11", "B2:C3"),
        ("F12:G20", "A1:E11", None),
        ("A1:B2", None, None),
    ],
)
def test_rect_clip(area_a1, limit, expected):
    clipped = rect(area_a1).clip(rect(limit) if limit else None)
    assert (clipped.a1 if clipped else None) == expected


def test_workbook_memo_is_per_instance(example):
    example.memo["scratch"] = 1
    assert "scratch" in example.memo
    copy = example.replace_sheet(example.sheet("Total"))
    assert copy == example
    assert "scratch" not in copy.memo
    del example.memo["scratch"]


def test_rect_geometry():
    r = Rect.around(coords("B4", "F8"))
    assert r.a1 == "B4:F8"
    assert r.contains(Coordinate.parse("D6"))
    assert not r.contains(Coordinate.parse("A6"))
    assert r.intersects(Rect.around(coords("F8", "G9")))
    assert not r.intersects(Rect.around(coords("G1", "H2")))


def test_describe_cells_merges_identical_row_runs():
    assert describe_cells(rect_coords("A4:E7")) == "A4:E7"
    assert describe_cells(coords("B2", "A3", "B3", "C3")) == "B2;A3:C3"
    assert describe_cells(coords("A1")) == "A1"
