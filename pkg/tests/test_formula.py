from __future__ import annotations

import pytest

from sheetlint.grid import CellType, Coordinate
from sheetlint.services.formula import (
    AreaReference,
    CellReference,
    CoordinateReference,
    FormulaParseError,
    OutsideSheetError,
    UnknownWorksheetError,
    UnrepresentableError,
    copy_equivalent,
    deref_area,
    deref_cell,
    deref_coordinate,
    parse_formula_a1,
    parse_formula_r1c1,
    referenced_cells,
    render_a1,
    static_result_type,
)
from tests.support import coords, make_cell


def at(addr: str) -> Coordinate:
    return Coordinate.parse(addr)


@pytest.mark.parametrize(
    "text, origin, sheet, expected",
    [
        ("=B3*B4", "B5", "Investment", "R[-2]C*R[-1]C"),
        ("=Total!E8", "B3", "Investment", "Total!R[5]C[3]"),
        ("=$A$1", "Q17", "S", "R1C1"),
        ("=SUM(B4:E4)", "F4", "Department1", "SUM(RC[-4]:RC[-1])"),
        ("=SUM(B4:B7)", "B8", "Department1", "SUM(R[-4]C:R[-1]C)"),
        ("=B9+C9*$B$5+D9*$B$4", "E9", "Investment", "RC[-3]+RC[-2]*R5C2+RC[-1]*R4C2"),
        ("=Investment!B3", "B3", "Investment", "RC"),
        ("='My Sheet'!A1 & \"x\"", "B2", "S", "'My Sheet'!R[-1]C[-1]&\"x\""),
        ("=round( A1 , 2 )", "B1", "S", "ROUND(RC[-1],2)"),
        ("=IF(A1>=1e3,TRUE,#n/a)", "B1", "S", "IF(RC[-1]>=1E3,TRUE,#N/A)"),
        ("=SUM(E4:B4)", "F4", "S", "SUM(RC[-4]:RC[-1])"),
    ],
)
def test_parse_a1_to_r1c1(text, origin, sheet, expected):
    assert parse_formula_a1(text, at(origin), sheet).r1c1_text == expected


def test_parse_collects_references_in_order():
    f = parse_formula_a1("=B9+C9*$B$5+SUM(D9:D10)", at("E9"), "Investment")
    assert [r.r1c1 for r in f.cell_refs] == ["RC[-3]", "RC[-2]", "R5C2"]
    assert f.area_refs == (
        AreaReference(
            sheet=None,
            x1=CoordinateReference(False, -1),
            y1=CoordinateReference(False, 0),
            x2=CoordinateReference(False, -1),
            y2=CoordinateReference(False, 1),
        ),
    )


@pytest.mark.parametrize(
    "text, message, token, position",
    [
        ("=SUM(A1", "expected ')'", "<end>", 3),
        ("=A1+", "unexpected end of formula", "<end>", 2),
        ("=A1 B1", "unexpected token", "R[-2]C[-1]", 1),
        ("=myName*2", "unsupported name or reference", "myName", 0),
        ("=\"open", "unterminated string literal", "\"open", 0),
        ("=A1 ~ 2", "unexpected character", "~", 3),
        ("=XFE1", "reference beyond sheet limits", "XFE", 0),
    ],
)
def test_parse_errors_name_token_and_position(text, message, token, position):
    with pytest.raises(FormulaParseError) as info:
        parse_formula_a1(text, at("C3"), "S")
    err = info.value
    assert str(err).startswith(message)
    assert (err.token, err.position) == (token, position)



def test_parse_empty_formula():
    with pytest.raises(FormulaParseError, match="empty formula"):
        parse_formula_a1("=", at("A1"))


@pytest.mark.parametrize(
    "r1c1, origin, expected",
    [
        ("R[-2]C*R[-1]C", "B5", "B3*B4"),
        ("R1C1", "Z99", "$A$1"),
        ("Total!R[5]C[3]", "B3", "Total!E8"),
        ("SUM(R[-4]C:R[-1]C)", "C8", "SUM(C4:C7)"),
        ("R1C[1]+RC2", "A5", "B$1+$B5"),
    ],
)
def test_render_a1(r1c1, origin, expected):
    assert render_a1(parse_formula_r1c1(r1c1), at(origin)) == expected


def test_render_a1_outside_sheet():
    with pytest.raises(UnrepresentableError, match="unrepresentable at origin"):
        render_a1(parse_formula_r1c1("R[-2]C"), at("A1"))


@pytest.mark.parametrize(
    "ref, base, expected",
    [
        (CoordinateReference(False, -3), 5, 2),
        (CoordinateReference(True, 5), 900, 5),
        (CoordinateReference(False, 0), 7, 7),
    ],
)
def test_deref_coordinate(ref, base, expected):
    assert deref_coordinate(ref, base) == expected


def test_deref_coordinate_underflow():
    with pytest.raises(OutsideSheetError, match="reference outside sheet"):
        deref_coordinate(CoordinateReference(False, -5), 5)


def test_deref_cell(example):
    e11 = example.cell("Investment", at("E11"))
    assert deref_cell(e11.formula.cell_refs[1], e11, example) == ("Investment", at("C11"))
    b3 = example.cell("Investment", at("B3"))
    assert deref_cell(b3.formula.cell_refs[0], b3, example) == ("Total", at("E8"))
    absolute = CellReference(sheet=None, col_ref=CoordinateReference(True, 1), row_ref=CoordinateReference(True, 1))
    assert deref_cell(absolute, ("Total", at("Q40"))) == ("Total", at("A1"))


def test_deref_cell_unknown_worksheet(example):
    ref = parse_formula_a1("=Nowhere!A1", at("A1"), "Total").cell_refs[0]
    with pytest.raises(UnknownWorksheetError, match="unknown worksheet"):
        deref_cell(ref, ("Total", at("A1")), example)


def test_deref_area(example):
    e8 = example.cell("Total", at("E8"))
    assert deref_area(e8.formula.area_refs[0], e8, example) == {("Total", c) for c in coords("B8", "C8", "D8")}
    b8 = example.cell("Department1", at("B8"))
    assert deref_area(b8.formula.area_refs[0], b8) == {("Department1", c) for c in coords("B4", "B5", "B6", "B7")}
    single = parse_formula_a1("=SUM(A1:A1)", at("C3"), "S").area_refs[0]
    assert deref_area(single, ("S", at("C3"))) == {("S", at("A1"))}


def test_referenced_cells(example):
    e11 = example.cell("Investment", at("E11"))
    expected = {("Investment", c) for c in coords("B11", "C11", "B5", "D11", "B4")}
    assert referenced_cells(e11, example) == expected
    e8 = example.cell("Total", at("E8"))
    assert referenced_cells(e8, example) == {("Total", c) for c in coords("B8", "C8", "D8")}
    assert referenced_cells(example.cell("Investment", at("B4")), example) == set()


def test_copy_equivalent(example):
    inv = example.sheet("Investment")
    assert copy_equivalent(inv.get(at("E9")), inv.get(at("E10")))
    assert not copy_equivalent(inv.get(at("B3")), inv.get(at("B5")))
    assert copy_equivalent(inv.get(at("B4")), inv.get(at("B4")))
    d1 = example.cell("Department1", at("B8"))
    d3 = example.cell("Department3", at("F8"))
    assert copy_equivalent(d1, d3)


def test_copy_equivalence_classes(example):
    classes: dict[str, set[str]] = {}
    for cell in example.iter_cells():
        if cell.formula is not None:
            classes.setdefault(cell.formula.r1c1_text, set()).add(cell.ref)
    multi = sorted(sorted(refs) for refs in classes.values() if len(refs) > 1)
    assert len(multi) == 7
    assert ["Investment!E10", "Investment!E11", "Investment!E9"] in multi
    assert sorted(f"Department{n}!{c}8" for n in (1, 2, 3) for c in "BCDEF") in multi
    assert classes["R[-2]C*R[-1]C"] == {"Investment!B5"}
    assert classes["Total!R[5]C[3]"] == {"Investment!B3"}


def test_static_result_type():
    f4 = make_cell("Department1", "F4", "=SUM(B4:E4)")
    assert static_result_type(f4) is CellType.NUMERIC
    assert static_result_type(make_cell("S", "A1", "Q1")) is CellType.STRING
    assert static_result_type(make_cell("S", "C1", "=A1&B1")) is CellType.STRING
    assert static_result_type(make_cell("S", "C1", "=A1>B1")) is CellType.BOOLEAN
    assert static_result_type(make_cell("S", "C1", "=-A1")) is CellType.NUMERIC
    assert static_result_type(make_cell("S", "C1", "=A1")) is None
    assert static_result_type(make_cell("S", "C1", "=VLOOKUP(A1,B1:B2,1)")) is None
    assert static_result_type(None) is CellType.EMPTY


def test_static_result_type_prefers_cached_value(example):
    assert static_result_type(example.cell("Department1", at("F4"))) is CellType.NUMERIC
    assert static_result_type(example.cell("Total", at("B4"))) is CellType.NUMERIC
