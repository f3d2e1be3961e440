from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING, Any, Iterable, Iterator, Mapping

import networkx as nx

if TYPE_CHECKING:
    from sheetlint.services.formula import FormulaR1C1


MAX_COLUMNS = 16384
MAX_ROWS = 1048576

_ADDR_RE = re.compile(r"^\$?([A-Za-z]{1,3})\$?([1-9][0-9]*)$")


class GridError(ValueError):
    pass


def column_index(letters: str) -> int:
    idx = 0
    for ch in letters.upper():
        idx = idx * 26 + (ord(ch) - 64)
    return idx


def column_letters(index: int) -> str:
    if index < 1:
        raise GridError(f"column index must be >= 1, got {index}")
    out = ""
    while index:
        index, rem = divmod(index - 1, 26)
        out = chr(65 + rem) + out
    return out


@dataclass(frozen=True)
class Coordinate:
    """1-based (col, row) position. Sorting is row-major."""

    col: int
    row: int

    def __post_init__(self) -> None:
        if self.col < 1 or self.row < 1:
            raise GridError(f"coordinate out of sheet space col={self.col} row={self.row}")

    @property
    def key(self) -> tuple[int, int]:
        return (self.row, self.col)

    def __lt__(self, other: Coordinate) -> bool:
        return self.key < other.key

    def __le__(self, other: Coordinate) -> bool:
        return self.key <= other.key

    @property
    def a1(self) -> str:
        return f"{column_letters(self.col)}{self.row}"

    @classmethod
    def parse(cls, addr: str) -> Coordinate:
        m = _ADDR_RE.match(addr.strip())
        if not m:
            raise GridError(f"invalid A1 address: {addr!r}")
        col = column_index(m.group(1))
        row = int(m.group(2))
        if col > MAX_COLUMNS or row > MAX_ROWS:
            raise GridError(f"address beyond sheet limits: {addr!r}")
        return cls(col=col, row=row)

    def __str__(self) -> str:
        return self.a1


class CellType(str, Enum):
    FORMULA = "formula"
    BOOLEAN = "boolean"
    NUMERIC = "numeric"
    STRING = "string"
    ERROR = "error"
    EMPTY = "empty"


Scalar = bool | int | float | str


def scalar_type(value: Scalar | None) -> CellType:
    """Cell type of a constant as it would be stored in a cell."""
    if value is None:
        return CellType.EMPTY
    if isinstance(value, bool):
        return CellType.BOOLEAN
    if isinstance(value, (int, float)):
        return CellType.NUMERIC
    if isinstance(value, str) and value.upper() in ERROR_LITERALS:
        return CellType.ERROR
    return CellType.STRING


ERROR_LITERALS = frozenset(
    {"#NULL!", "#DIV/0!", "#VALUE!", "#REF!", "#NAME?", "#NUM!", "#N/A", "#GETTING_DATA", "#SPILL!", "#CALC!"}
)


@dataclass(frozen=True)
class Cell:
    sheet: str
    coord: Coordinate
    cell_type: CellType
    literal: Scalar | None = None
    formula: FormulaR1C1 | None = None
    cached_value: Scalar | None = None

    def __post_init__(self) -> None:
        if (self.formula is not None) != (self.cell_type is CellType.FORMULA):
            raise GridError(f"{self.ref}: formula must be present iff cell_type is formula")
        if self.cell_type is CellType.EMPTY and (
            self.literal is not None or self.formula is not None or self.cached_value is not None
        ):
            raise GridError(f"{self.ref}: empty cell carries content")

    @property
    def ref(self) -> str:
        return f"{self.sheet}!{self.coord.a1}"

    @property
    def cached_type(self) -> CellType | None:
        return None if self.cached_value is None else scalar_type(self.cached_value)


@dataclass(frozen=True)
class Worksheet:
    name: str
    cells: Mapping[Coordinate, Cell] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for coord, cell in self.cells.items():
            if cell.cell_type is CellType.EMPTY:
                raise GridError(f"{self.name}!{coord.a1}: empty cells are not stored")
            if cell.coord != coord or cell.sheet != self.name:
                raise GridError(f"{self.name}!{coord.a1}: cell stored under a foreign key")

    @cached_property
    def bounds(self) -> Coordinate | None:
        if not self.cells:
            return None
        return Coordinate(col=max(c.col for c in self.cells), row=max(c.row for c in self.cells))

    @property
    def used_rect(self) -> Rect | None:
        """A1 through the last filled column and row."""
        if self.bounds is None:
            return None
        return Rect(Coordinate(col=1, row=1), self.bounds)

    def get(self, coord: Coordinate) -> Cell | None:
        return self.cells.get(coord)

    def cell_type_at(self, coord: Coordinate) -> CellType:
        return cell_type(self.cells.get(coord))

    def iter_cells(self) -> Iterator[Cell]:
        for coord in sorted(self.cells):
            yield self.cells[coord]

    def with_cell(self, cell: Cell) -> Worksheet:
        cells = dict(self.cells)
        cells[cell.coord] = replace(cell, sheet=self.name)
        return replace(self, cells=cells)

    def without_cell(self, coord: Coordinate) -> Worksheet:
        cells = {k: v for k, v in self.cells.items() if k != coord}
        return replace(self, cells=cells)


@dataclass(frozen=True)
class LoadWarning:
    sheet: str
    addr: str
    kind: str
    message: str


@dataclass(frozen=True)
class Workbook:
    sheets: tuple[Worksheet, ...] = ()
    source_path: str = ""
    warnings: tuple[LoadWarning, ...] = ()

    def __post_init__(self) -> None:
        names = [ws.name for ws in self.sheets]
        if len(names) != len(set(names)):
            raise GridError(f"worksheet names must be unique: {names}")

    @cached_property
    def memo(self) -> dict[str, Any]:
        """Derived analyses of this instance; copies made with replace start empty."""
        return {}

    def sheet(self, name: str) -> Worksheet | None:
        for ws in self.sheets:
            if ws.name == name:
                return ws
        return None

    def sheet_index(self, name: str) -> int:
        for i, ws in enumerate(self.sheets):
            if ws.name == name:
                return i
        return len(self.sheets)

    def cell(self, sheet: str, coord: Coordinate) -> Cell | None:
        ws = self.sheet(sheet)
        return None if ws is None else ws.get(coord)

    def iter_cells(self) -> Iterator[Cell]:
        for ws in self.sheets:
            yield from ws.iter_cells()

    def replace_sheet(self, ws: Worksheet) -> Workbook:
        if self.sheet(ws.name) is None:
            raise GridError(f"unknown worksheet: {ws.name}")
        return replace(self, sheets=tuple(ws if s.name == ws.name else s for s in self.sheets))


def cell_type(c: Cell | None) -> CellType:
    return CellType.EMPTY if c is None else c.cell_type


def neighbors(c: Cell | Coordinate, w: Worksheet | None = None) -> set[Coordinate]:
    coord = c.coord if isinstance(c, Cell) else c
    out: set[Coordinate] = set()
    for dc, dr in ((0, -1), (0, 1), (-1, 0), (1, 0)):
        col, row = coord.col + dc, coord.row + dr
        if 1 <= col <= MAX_COLUMNS and 1 <= row <= MAX_ROWS:
            out.add(Coordinate(col=col, row=row))
    return out


def adjacency_graph(coords: Iterable[Coordinate]) -> nx.Graph:
    nodes = set(coords)
    graph = nx.Graph()
    graph.add_nodes_from(nodes)
    for coord in nodes:
        for other in (Coordinate(col=coord.col + 1, row=coord.row), Coordinate(col=coord.col, row=coord.row + 1)):
            if other in nodes:
                graph.add_edge(coord, other)
    return graph


def connected(cells: Iterable[Coordinate], w: Worksheet | None = None) -> bool:
    coords = set(cells)
    if not coords:
        raise GridError("empty cell set")
    return nx.is_connected(adjacency_graph(coords))


@dataclass(frozen=True)
class Rect:
    top_left: Coordinate
    bottom_right: Coordinate

    @classmethod
    def around(cls, cells: Iterable[Coordinate]) -> Rect:
        coords = list(cells)
        if not coords:
            raise GridError("empty cell set")
        return cls(
            top_left=Coordinate(col=min(c.col for c in coords), row=min(c.row for c in coords)),
            bottom_right=Coordinate(col=max(c.col for c in coords), row=max(c.row for c in coords)),
        )

    @property
    def left(self) -> int:
        return self.top_left.col

    @property
    def right(self) -> int:
        return self.bottom_right.col

    @property
    def top(self) -> int:
        return self.top_left.row

    @property
    def bottom(self) -> int:
        return self.bottom_right.row

    def contains(self, coord: Coordinate) -> bool:
        return self.left <= coord.col <= self.right and self.top <= coord.row <= self.bottom

    def intersects(self, other: Rect) -> bool:
        return not (
            other.right < self.left or other.left > self.right or other.bottom < self.top or other.top > self.bottom
        )

    def clip(self, other: Rect | None) -> Rect | None:
        if other is None or not self.intersects(other):
            return None
        return Rect(
            Coordinate(col=max(self.left, other.left), row=max(self.top, other.top)),
            Coordinate(col=min(self.right, other.right), row=min(self.bottom, other.bottom)),
        )

    def coords(self) -> set[Coordinate]:
        return {
            Coordinate(col=col, row=row)
            for col in range(self.left, self.right + 1)
            for row in range(self.top, self.bottom + 1)
        }

    @property
    def a1(self) -> str:
        return f"{self.top_left.a1}:{self.bottom_right.a1}"


def area(cells: Iterable[Coordinate], w: Worksheet | None = None) -> set[Coordinate]:
    return Rect.around(cells).coords()


def describe_cells(cells: Iterable[Coordinate]) -> str:
    """Compact A1 listing: identical consecutive row runs are merged into rectangles."""
    by_row: dict[int, list[int]] = {}
    for c in cells:
        by_row.setdefault(c.row, []).append(c.col)
    runs: list[tuple[int, int, int]] = []  # (row, start col, end col)
    for row in sorted(by_row):
        cols = sorted(by_row[row])
        start = prev = cols[0]
        for col in cols[1:]:
            if col != prev + 1:
                runs.append((row, start, prev))
                start = col
            prev = col
        runs.append((row, start, prev))

    parts: list[str] = []
    open_rects: dict[tuple[int, int], tuple[int, int]] = {}  # span -> (top row, last row)
    emitted: list[tuple[int, int, int, int]] = []
    for row, start, end in runs:
        span = (start, end)
        rect = open_rects.get(span)
        if rect is not None and rect[1] == row - 1:
            open_rects[span] = (rect[0], row)
        else:
            if rect is not None:
                emitted.append((rect[0], start, rect[1], end))
            open_rects[span] = (row, row)
    for (start, end), (top, bottom) in open_rects.items():
        emitted.append((top, start, bottom, end))
    for top, start, bottom, end in sorted(emitted):
        a = Coordinate(col=start, row=top).a1
        b = Coordinate(col=end, row=bottom).a1
        parts.append(a if a == b else f"{a}:{b}")
    return ";".join(parts)
