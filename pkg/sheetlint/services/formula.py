from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from sheetlint.grid import (
    MAX_COLUMNS,
    MAX_ROWS,
    Cell,
    CellType,
    Coordinate,
    Rect,
    Workbook,
    column_index,
    column_letters,
    scalar_type,
)


class FormulaParseError(ValueError):
    def __init__(self, message: str, *, token: str = "", position: int = 0) -> None:
        super().__init__(f"{message} at position {position}: {token!r}" if token else f"{message} at position {position}")
        self.token = token
        self.position = position


class DereferenceError(RuntimeError):
    pass


class OutsideSheetError(DereferenceError):
    pass


class UnknownWorksheetError(DereferenceError):
    pass


class UnrepresentableError(DereferenceError):
    pass


@dataclass(frozen=True)
class CoordinateReference:
    absolute: bool
    value: int

    def __post_init__(self) -> None:
        if self.absolute and self.value < 1:
            raise ValueError(f"absolute coordinate reference must be >= 1, got {self.value}")

    def r1c1(self, axis: str) -> str:
        if self.absolute:
            return f"{axis}{self.value}"
        return axis if self.value == 0 else f"{axis}[{self.value}]"


@dataclass(frozen=True)
class CellReference:
    sheet: str | None
    col_ref: CoordinateReference
    row_ref: CoordinateReference

    @property
    def r1c1(self) -> str:
        return f"{_sheet_prefix(self.sheet)}{self.row_ref.r1c1('R')}{self.col_ref.r1c1('C')}"


@dataclass(frozen=True)
class AreaReference:
    sheet: str | None
    x1: CoordinateReference
    y1: CoordinateReference
    x2: CoordinateReference
    y2: CoordinateReference

    @property
    def r1c1(self) -> str:
        start = f"{self.y1.r1c1('R')}{self.x1.r1c1('C')}"
        end = f"{self.y2.r1c1('R')}{self.x2.r1c1('C')}"
        return f"{_sheet_prefix(self.sheet)}{start}:{end}"


class TokenKind(str, Enum):
    OPERATOR = "operator"
    FUNCTION = "function"
    LITERAL = "literal"
    CELL_REF = "cell-ref"
    AREA_REF = "area-ref"
    OPEN = "open"
    CLOSE = "close"
    SEPARATOR = "separator"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str


@dataclass(frozen=True)
class FormulaR1C1:
    r1c1_text: str
    tokens: tuple[Token, ...]
    cell_refs: tuple[CellReference, ...] = ()
    area_refs: tuple[AreaReference, ...] = ()
    # Outermost operator/function result type; None when it cannot be told statically.
    result_hint: CellType | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return self.r1c1_text


_PLAIN_SHEET_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")
_CELL_LIKE_RE = re.compile(r"^(?:[A-Za-z]{1,3}[0-9]+|R[0-9]*C[0-9]*)$", re.IGNORECASE)


def _sheet_prefix(sheet: str | None) -> str:
    if sheet is None:
        return ""
    if _PLAIN_SHEET_RE.match(sheet) and not _CELL_LIKE_RE.match(sheet):
        return f"{sheet}!"
    return "'" + sheet.replace("'", "''") + "'!"


def _unquote_sheet(raw: str) -> str:
    if raw.startswith("'"):
        return raw[1:-1].replace("''", "'")
    return raw


_SHEET = r"(?:(?P<sheet>'(?:[^']|'')+'|[A-Za-z_][A-Za-z0-9_.]*)!)?"
_END = r"(?![A-Za-z0-9_.(!\[])"
_A1_REF_RE = re.compile(
    _SHEET + r"(?P<c1>\$?[A-Za-z]{1,3})(?P<r1>\$?[0-9]+)(?::(?P<c2>\$?[A-Za-z]{1,3})(?P<r2>\$?[0-9]+))?" + _END
)
_R1C1_PART = r"R(?:\[-?[0-9]+\]|[0-9]+)?C(?:\[-?[0-9]+\]|[0-9]+)?"
_R1C1_REF_RE = re.compile(_SHEET + rf"(?P<a>{_R1C1_PART})(?::(?P<b>{_R1C1_PART}))?" + _END, re.IGNORECASE)
_R1C1_AXIS_RE = re.compile(r"R(\[-?[0-9]+\]|[0-9]+)?C(\[-?[0-9]+\]|[0-9]+)?", re.IGNORECASE)

_WS_RE = re.compile(r"\s+")
_STRING_RE = re.compile(r'"(?:[^"]|"")*"')
_NUMBER_RE = re.compile(r"(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_ERROR_RE = re.compile(r"#(?:NULL!|DIV/0!|VALUE!|REF!|NAME\?|NUM!|N/A)", re.IGNORECASE)
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")
_OPERATORS = ("<=", ">=", "<>", "+", "-", "*", "/", "^", "&", "=", "<", ">", "%")

_Ref = CellReference | AreaReference


def _lex(text: str, ref_reader) -> tuple[list[Token], list[tuple[_Ref, int]]]:
    """Split formula text into canonical tokens; ref_reader turns a reference match into a ref."""
    tokens: list[Token] = []
    refs: list[tuple[_Ref, int]] = []
    pos = 0
    ref_re = ref_reader.pattern
    while pos < len(text):
        m = _WS_RE.match(text, pos)
        if m:
            pos = m.end()
            continue
        ch = text[pos]
        if ch == '"':
            m = _STRING_RE.match(text, pos)
            if not m:
                raise FormulaParseError("unterminated string literal", token=text[pos:], position=pos)
            tokens.append(Token(TokenKind.LITERAL, m.group(0)))
            pos = m.end()
            continue
        if ch == "#":
            m = _ERROR_RE.match(text, pos)
            if not m:
                raise FormulaParseError("unknown error literal", token=text[pos : pos + 8], position=pos)
            tokens.append(Token(TokenKind.LITERAL, m.group(0).upper()))
            pos = m.end()
            continue
        m = ref_re.match(text, pos)
        if m:
            ref = ref_reader(m, pos)
            kind = TokenKind.AREA_REF if isinstance(ref, AreaReference) else TokenKind.CELL_REF
            tokens.append(Token(kind, ref.r1c1))
            refs.append((ref, pos))
            pos = m.end()
            continue
        if ch.isdigit() or (ch == "." and pos + 1 < len(text) and text[pos + 1].isdigit()):
            m = _NUMBER_RE.match(text, pos)
            tokens.append(Token(TokenKind.LITERAL, m.group(0).upper()))
            pos = m.end()
            continue
        m = _IDENT_RE.match(text, pos)
        if m:
            name = m.group(0)
            after = m.end()
            while after < len(text) and text[after].isspace():
                after += 1
            if after < len(text) and text[after] == "(":
                tokens.append(Token(TokenKind.FUNCTION, name.upper()))
                pos = m.end()
                continue
            if name.upper() in ("TRUE", "FALSE"):
                tokens.append(Token(TokenKind.LITERAL, name.upper()))
                pos = m.end()
                continue
            raise FormulaParseError("unsupported name or reference", token=name, position=pos)
        if ch == "(":
            tokens.append(Token(TokenKind.OPEN, "("))
            pos += 1
            continue
        if ch == ")":
            tokens.append(Token(TokenKind.CLOSE, ")"))
            pos += 1
            continue
        if ch == ",":
            tokens.append(Token(TokenKind.SEPARATOR, ","))
            pos += 1
            continue
        for op in _OPERATORS:
            if text.startswith(op, pos):
                tokens.append(Token(TokenKind.OPERATOR, op))
                pos += len(op)
                break
        else:
            raise FormulaParseError("unexpected character", token=ch, position=pos)
    return tokens, refs


_NUMERIC_FUNCTIONS = frozenset(
    "SUM AVERAGE AVERAGEA AVERAGEIF AVERAGEIFS MIN MAX MINA MAXA COUNT COUNTA COUNTBLANK COUNTIF COUNTIFS "
    "SUMIF SUMIFS SUMPRODUCT SUMSQ PRODUCT ROUND ROUNDUP ROUNDDOWN ABS INT MOD POWER SQRT LN LOG LOG10 EXP "
    "MEDIAN MODE STDEV STDEVP VAR VARP NPV IRR PMT FV PV RATE NPER LEN FIND SEARCH VALUE ROW COLUMN ROWS "
    "COLUMNS DATE TIME TODAY NOW YEAR MONTH DAY HOUR MINUTE SECOND WEEKDAY RAND RANDBETWEEN PI CEILING "
    "FLOOR TRUNC SIGN MATCH RANK LARGE SMALL PERCENTILE QUARTILE CORREL SLOPE INTERCEPT FORECAST".split()
)
_STRING_FUNCTIONS = frozenset(
    "CONCATENATE CONCAT TEXTJOIN LEFT RIGHT MID UPPER LOWER PROPER TRIM TEXT SUBSTITUTE REPLACE REPT CHAR "
    "DOLLAR FIXED CLEAN T".split()
)
_BOOLEAN_FUNCTIONS = frozenset(
    "AND OR NOT XOR ISBLANK ISNUMBER ISTEXT ISNONTEXT ISERROR ISERR ISNA ISLOGICAL ISEVEN ISODD ISREF "
    "EXACT TRUE FALSE".split()
)


def function_result_type(name: str) -> CellType | None:
    name = name.upper()
    if name in _NUMERIC_FUNCTIONS:
        return CellType.NUMERIC
    if name in _STRING_FUNCTIONS:
        return CellType.STRING
    if name in _BOOLEAN_FUNCTIONS:
        return CellType.BOOLEAN
    return None


def _literal_type(text: str) -> CellType:
    if text.startswith('"'):
        return CellType.STRING
    if text.startswith("#"):
        return CellType.ERROR
    if text in ("TRUE", "FALSE"):
        return CellType.BOOLEAN
    return CellType.NUMERIC


_COMPARISONS = ("=", "<>", "<", ">", "<=", ">=")


class _Parser:
    """Recursive descent over canonical tokens; validates the grammar and types the outermost node."""

    def __init__(self, tokens: list[Token]) -> None:
        self.tokens = tokens
        self.i = 0

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def fail(self, message: str) -> FormulaParseError:
        tok = self.peek()
        return FormulaParseError(message, token=tok.text if tok else "<end>", position=self.i)

    def take_operator(self, ops: Iterable[str]) -> str | None:
        tok = self.peek()
        if tok is not None and tok.kind is TokenKind.OPERATOR and tok.text in ops:
            self.i += 1
            return tok.text
        return None

    def parse(self) -> CellType | None:
        if not self.tokens:
            raise FormulaParseError("empty formula")
        hint = self.comparison()
        if self.peek() is not None:
            raise self.fail("unexpected token")
        return hint

    def _binary(self, ops: tuple[str, ...], operand, result: CellType) -> CellType | None:
        hint = operand()
        while self.take_operator(ops):
            operand()
            hint = result
        return hint

    def comparison(self) -> CellType | None:
        return self._binary(_COMPARISONS, self.concat, CellType.BOOLEAN)

    def concat(self) -> CellType | None:
        return self._binary(("&",), self.additive, CellType.STRING)

    def additive(self) -> CellType | None:
        return self._binary(("+", "-"), self.term, CellType.NUMERIC)

    def term(self) -> CellType | None:
        return self._binary(("*", "/"), self.power, CellType.NUMERIC)

    def power(self) -> CellType | None:
        return self._binary(("^",), self.unary, CellType.NUMERIC)

    def unary(self) -> CellType | None:
        if self.take_operator(("+", "-")):
            self.unary()
            return CellType.NUMERIC
        hint = self.primary()
        while self.take_operator(("%",)):
            hint = CellType.NUMERIC
        return hint

    def primary(self) -> CellType | None:
        tok = self.peek()
        if tok is None:
            raise self.fail("unexpected end of formula")
        if tok.kind is TokenKind.LITERAL:
            self.i += 1
            return _literal_type(tok.text)
        if tok.kind in (TokenKind.CELL_REF, TokenKind.AREA_REF):
            self.i += 1
            return None
        if tok.kind is TokenKind.OPEN:
            self.i += 1
            hint = self.comparison()
            self.expect_close()
            return hint
        if tok.kind is TokenKind.FUNCTION:
            self.i += 1
            nxt = self.peek()
            if nxt is None or nxt.kind is not TokenKind.OPEN:
                raise self.fail("expected '(' after function name")
            self.i += 1
            self.arguments()
            self.expect_close()
            return function_result_type(tok.text)
        raise self.fail("unexpected token")

    def arguments(self) -> None:
        tok = self.peek()
        if tok is not None and tok.kind is TokenKind.CLOSE:
            return
        while True:
            tok = self.peek()
            if tok is not None and tok.kind not in (TokenKind.SEPARATOR, TokenKind.CLOSE):
                self.comparison()
            tok = self.peek()
            if tok is not None and tok.kind is TokenKind.SEPARATOR:
                self.i += 1
                continue
            return

    def expect_close(self) -> None:
        tok = self.peek()
        if tok is None or tok.kind is not TokenKind.CLOSE:
            raise self.fail("expected ')'")
        self.i += 1


def _build(tokens: list[Token], refs: list[tuple[_Ref, int]]) -> FormulaR1C1:
    hint = _Parser(tokens).parse()
    return FormulaR1C1(
        r1c1_text="".join(t.text for t in tokens),
        tokens=tuple(tokens),
        cell_refs=tuple(r for r, _ in refs if isinstance(r, CellReference)),
        area_refs=tuple(r for r, _ in refs if isinstance(r, AreaReference)),
        result_hint=hint,
    )


def _strip_equals(text: str) -> str:
    text = text.strip()
    return text[1:] if text.startswith("=") else text


def _a1_axis(raw: str, base: int, *, is_col: bool, pos: int) -> tuple[CoordinateReference, int]:
    absolute = raw.startswith("$")
    body = raw.lstrip("$")
    index = column_index(body) if is_col else int(body)
    limit = MAX_COLUMNS if is_col else MAX_ROWS
    if index < 1 or index > limit:
        raise FormulaParseError("reference beyond sheet limits", token=raw, position=pos)
    if absolute:
        return CoordinateReference(absolute=True, value=index), index
    return CoordinateReference(absolute=False, value=index - base), index


class _A1Reader:
    pattern = _A1_REF_RE

    def __init__(self, sheet: str | None, origin: Coordinate) -> None:
        self.sheet = sheet
        self.origin = origin

    def _sheet(self, m: re.Match) -> str | None:
        raw = m.group("sheet")
        if raw is None:
            return None
        name = _unquote_sheet(raw)
        return None if name == self.sheet else name

    def __call__(self, m: re.Match, pos: int) -> _Ref:
        sheet = self._sheet(m)
        c1, ci1 = _a1_axis(m.group("c1"), self.origin.col, is_col=True, pos=pos)
        r1, ri1 = _a1_axis(m.group("r1"), self.origin.row, is_col=False, pos=pos)
        if m.group("c2") is None:
            return CellReference(sheet=sheet, col_ref=c1, row_ref=r1)
        c2, ci2 = _a1_axis(m.group("c2"), self.origin.col, is_col=True, pos=pos)
        r2, ri2 = _a1_axis(m.group("r2"), self.origin.row, is_col=False, pos=pos)
        if ci1 > ci2:
            c1, c2 = c2, c1
        if ri1 > ri2:
            r1, r2 = r2, r1
        return AreaReference(sheet=sheet, x1=c1, y1=r1, x2=c2, y2=r2)


def _r1c1_axis(raw: str | None) -> CoordinateReference:
    if not raw:
        return CoordinateReference(absolute=False, value=0)
    if raw.startswith("["):
        return CoordinateReference(absolute=False, value=int(raw[1:-1]))
    value = int(raw)
    if value < 1:
        raise ValueError("absolute R1C1 index must be >= 1")
    return CoordinateReference(absolute=True, value=value)


def _ordered(a: CoordinateReference, b: CoordinateReference) -> tuple[CoordinateReference, CoordinateReference]:
    if a.absolute == b.absolute and a.value > b.value:
        return b, a
    return a, b


class _R1C1Reader:
    pattern = _R1C1_REF_RE

    def __init__(self, sheet: str | None) -> None:
        self.sheet = sheet

    def __call__(self, m: re.Match, pos: int) -> _Ref:
        raw = m.group("sheet")
        sheet = None if raw is None else _unquote_sheet(raw)
        if sheet == self.sheet:
            sheet = None
        try:
            ra = _R1C1_AXIS_RE.fullmatch(m.group("a"))
            row1, col1 = _r1c1_axis(ra.group(1)), _r1c1_axis(ra.group(2))
            if m.group("b") is None:
                return CellReference(sheet=sheet, col_ref=col1, row_ref=row1)
            rb = _R1C1_AXIS_RE.fullmatch(m.group("b"))
            row2, col2 = _r1c1_axis(rb.group(1)), _r1c1_axis(rb.group(2))
        except ValueError as e:
            raise FormulaParseError(str(e), token=m.group(0), position=pos) from e
        col1, col2 = _ordered(col1, col2)
        row1, row2 = _ordered(row1, row2)
        return AreaReference(sheet=sheet, x1=col1, y1=row1, x2=col2, y2=row2)


def parse_formula_a1(text: str, origin: Coordinate, sheet: str | None = None) -> FormulaR1C1:
    """Parse an A1 formula body written at `sheet!origin` into canonical R1C1."""
    tokens, refs = _lex(_strip_equals(text), _A1Reader(sheet, origin))
    return _build(tokens, refs)


def parse_formula_r1c1(text: str, sheet: str | None = None) -> FormulaR1C1:
    tokens, refs = _lex(_strip_equals(text), _R1C1Reader(sheet))
    return _build(tokens, refs)


def deref_coordinate(r: CoordinateReference, base: int, *, limit: int = max(MAX_COLUMNS, MAX_ROWS)) -> int:
    if base < 1:
        raise ValueError(f"base index must be >= 1, got {base}")
    index = r.value if r.absolute else base + r.value
    if index < 1 or index > limit:
        raise OutsideSheetError("reference outside sheet")
    return index


Origin = tuple[str, Coordinate]


def _origin(origin: Cell | Origin) -> Origin:
    if isinstance(origin, Cell):
        return origin.sheet, origin.coord
    return origin


def _target_sheet(sheet: str | None, origin_sheet: str, workbook: Workbook | None) -> str:
    target = origin_sheet if sheet is None else sheet
    if workbook is not None and workbook.sheet(target) is None:
        raise UnknownWorksheetError(f"unknown worksheet: {target}")
    return target


def deref_cell(r: CellReference, origin: Cell | Origin, workbook: Workbook | None = None) -> tuple[str, Coordinate]:
    sheet, coord = _origin(origin)
    target = _target_sheet(r.sheet, sheet, workbook)
    return target, Coordinate(
        col=deref_coordinate(r.col_ref, coord.col, limit=MAX_COLUMNS),
        row=deref_coordinate(r.row_ref, coord.row, limit=MAX_ROWS),
    )


def deref_area_rect(r: AreaReference, origin: Cell | Origin, workbook: Workbook | None = None) -> tuple[str, Rect]:
    sheet, coord = _origin(origin)
    target = _target_sheet(r.sheet, sheet, workbook)
    cols = sorted((deref_coordinate(r.x1, coord.col, limit=MAX_COLUMNS), deref_coordinate(r.x2, coord.col, limit=MAX_COLUMNS)))
    rows = sorted((deref_coordinate(r.y1, coord.row, limit=MAX_ROWS), deref_coordinate(r.y2, coord.row, limit=MAX_ROWS)))
    return target, Rect(Coordinate(col=cols[0], row=rows[0]), Coordinate(col=cols[1], row=rows[1]))


def deref_area(r: AreaReference, origin: Cell | Origin, workbook: Workbook | None = None) -> set[tuple[str, Coordinate]]:
    target, rect = deref_area_rect(r, origin, workbook)
    return {(target, c) for c in rect.coords()}


def deref_area_used(r: AreaReference, origin: Cell | Origin, workbook: Workbook) -> tuple[str, Rect | None]:
    """The dereferenced area cut down to the target sheet's used range; None when it lies wholly outside."""
    target, rect = deref_area_rect(r, origin, workbook)
    ws = workbook.sheet(target)
    return target, rect.clip(ws.used_rect if ws is not None else None)


def referenced_cells(c: Cell | None, workbook: Workbook | None = None) -> set[tuple[str, Coordinate]]:
    if c is None or c.formula is None:
        return set()
    out: set[tuple[str, Coordinate]] = set()
    for ref in c.formula.cell_refs:
        out.add(deref_cell(ref, c, workbook))
    for ref in c.formula.area_refs:
        out |= deref_area(ref, c, workbook)
    return out


def copy_equivalent(c: Cell, c2: Cell) -> bool:
    if c == c2:
        return True
    if c.formula is None or c2.formula is None:
        return False
    return c.formula.r1c1_text == c2.formula.r1c1_text


def static_result_type(c: Cell | None) -> CellType | None:
    """Evaluated type of a cell; None stands for a formula whose type cannot be told statically."""
    if c is None:
        return CellType.EMPTY
    if c.formula is None:
        return c.cell_type
    if c.cached_value is not None:
        return scalar_type(c.cached_value)
    return c.formula.result_hint


def _a1_axis_text(r: CoordinateReference, base: int, *, is_col: bool) -> str:
    limit = MAX_COLUMNS if is_col else MAX_ROWS
    index = r.value if r.absolute else base + r.value
    if index < 1 or index > limit:
        raise UnrepresentableError("unrepresentable at origin")
    body = column_letters(index) if is_col else str(index)
    return f"${body}" if r.absolute else body


def _a1_ref_text(ref: _Ref, origin: Coordinate) -> str:
    if isinstance(ref, CellReference):
        col = _a1_axis_text(ref.col_ref, origin.col, is_col=True)
        row = _a1_axis_text(ref.row_ref, origin.row, is_col=False)
        return f"{_sheet_prefix(ref.sheet)}{col}{row}"
    start = _a1_axis_text(ref.x1, origin.col, is_col=True) + _a1_axis_text(ref.y1, origin.row, is_col=False)
    end = _a1_axis_text(ref.x2, origin.col, is_col=True) + _a1_axis_text(ref.y2, origin.row, is_col=False)
    return f"{_sheet_prefix(ref.sheet)}{start}:{end}"


def render_a1(f: FormulaR1C1, origin: Coordinate) -> str:
    cells = iter(f.cell_refs)
    areas = iter(f.area_refs)
    parts: list[str] = []
    for tok in f.tokens:
        if tok.kind is TokenKind.CELL_REF:
            parts.append(_a1_ref_text(next(cells), origin))
        elif tok.kind is TokenKind.AREA_REF:
            parts.append(_a1_ref_text(next(areas), origin))
        else:
            parts.append(tok.text)
    return "".join(parts)
