from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from itertools import chain
from typing import Any, Iterable, Mapping, Sequence

import networkx as nx

from sheetlint.grid import Cell, CellType, Coordinate, Rect, Workbook, Worksheet, area, describe_cells
from sheetlint.services.formula import DereferenceError, deref_area_used, deref_cell


log = logging.getLogger("sheetlint")


class Orientation(str, Enum):
    ROW = "row"
    COLUMN = "column"
    SINGLETON = "singleton"


class LayerOrientation(str, Enum):
    COLUMN = "column-layer"
    ROW = "row-layer"


@dataclass(frozen=True)
class TypeBasedGroup:
    sheet: str
    cells: frozenset[Coordinate]
    group_type: CellType
    formula: str | None = None

    @property
    def rect(self) -> Rect:
        return Rect.around(self.cells)

    @property
    def label(self) -> str:
        return f"{self.sheet}!{describe_cells(self.cells)}"


@dataclass(frozen=True)
class PartitionedFormulaGroup:
    sheet: str
    cells: tuple[Coordinate, ...]
    orientation: Orientation
    formula: str

    @property
    def rect(self) -> Rect:
        return Rect.around(self.cells)

    @property
    def label(self) -> str:
        return f"{self.sheet}!{self.rect.a1}"

    @property
    def id(self) -> str:
        return f"formula:{self.label}"


@dataclass(frozen=True)
class ReferenceBasedGroup:
    sheet: str
    cells: tuple[Coordinate, ...]
    orientation: Orientation
    # (referring group id, reference index); kept for inspection only.
    provenance: tuple[tuple[str, int], ...] = field(default=(), compare=False)

    @property
    def rect(self) -> Rect:
        return Rect.around(self.cells)

    @property
    def label(self) -> str:
        return f"{self.sheet}!{self.rect.a1}"

    @property
    def id(self) -> str:
        return f"reference:{self.label}"


Group = PartitionedFormulaGroup | ReferenceBasedGroup


@dataclass(frozen=True)
class Block:
    sheet: str
    top_left: Coordinate
    bottom_right: Coordinate
    member_groups: tuple[str, ...] = ()

    @property
    def rect(self) -> Rect:
        return Rect(self.top_left, self.bottom_right)

    @property
    def label(self) -> str:
        return f"{self.sheet}!{self.rect.a1}"

    @property
    def id(self) -> str:
        return f"block:{self.label}"


@dataclass(frozen=True)
class HeaderLayer:
    block: str
    orientation: LayerOrientation
    level: int
    cells: tuple[Coordinate, ...]
    meta_header: Coordinate | None = None

    @property
    def label(self) -> str:
        return Rect.around(self.cells).a1


@dataclass(frozen=True)
class Diagnostic:
    sheet: str
    addr: str
    message: str


@dataclass(frozen=True)
class SheetStructure:
    name: str
    type_groups: tuple[TypeBasedGroup, ...] = ()
    formula_groups: tuple[TypeBasedGroup, ...] = ()
    partitioned_groups: tuple[PartitionedFormulaGroup, ...] = ()
    reference_groups: tuple[ReferenceBasedGroup, ...] = ()
    non_blockables: frozenset[Coordinate] = frozenset()
    blocks: tuple[Block, ...] = ()
    layers: tuple[HeaderLayer, ...] = ()
    meta_headers: tuple[tuple[Coordinate, HeaderLayer], ...] = ()


@dataclass(frozen=True)
class StructureModel:
    workbook: Workbook
    sheets: Mapping[str, SheetStructure]
    # pfg id -> reference-based groups before merging
    group_references: Mapping[str, tuple[ReferenceBasedGroup, ...]] = field(default_factory=dict)
    # pfg id -> referred partitioned formula groups
    referred: Mapping[str, tuple[PartitionedFormulaGroup, ...]] = field(default_factory=dict)
    diagnostics: tuple[Diagnostic, ...] = ()

    def sheet(self, name: str) -> SheetStructure:
        return self.sheets[name]

    @cached_property
    def partitioned_groups(self) -> tuple[PartitionedFormulaGroup, ...]:
        return tuple(chain.from_iterable(self.sheets[ws.name].partitioned_groups for ws in self.workbook.sheets))

    @cached_property
    def groups_by_id(self) -> dict[str, PartitionedFormulaGroup]:
        return {g.id: g for g in self.partitioned_groups}

    @cached_property
    def group_index(self) -> dict[tuple[str, Coordinate], PartitionedFormulaGroup]:
        return {(g.sheet, c): g for g in self.partitioned_groups for c in g.cells}

    @cached_property
    def memo(self) -> dict[str, Any]:
        return {}

    def group_key(self, g: Group | Block) -> tuple[int, int, int, int, int]:
        r = g.rect
        return (self.workbook.sheet_index(g.sheet), r.top, r.left, r.bottom, r.right)


def _layout_key(g: Group | Block) -> tuple[int, int, int, int, int]:
    r = g.rect
    kind = 0 if isinstance(g, PartitionedFormulaGroup) else 1
    return (r.top, r.left, r.bottom, r.right, kind)


def _runs(cells: Iterable[Coordinate], *, by_column: bool) -> list[tuple[Coordinate, ...]]:
    lines: dict[int, list[Coordinate]] = {}
    for c in cells:
        lines.setdefault(c.col if by_column else c.row, []).append(c)
    out: list[tuple[Coordinate, ...]] = []
    for line in sorted(lines):
        members = sorted(lines[line], key=(lambda c: c.row) if by_column else (lambda c: c.col))
        run = [members[0]]
        for c in members[1:]:
            prev = run[-1]
            step = c.row - prev.row if by_column else c.col - prev.col
            if step == 1:
                run.append(c)
            else:
                out.append(tuple(run))
                run = [c]
        out.append(tuple(run))
    return out


def _partition_lines(cells: Iterable[Coordinate]) -> list[tuple[Orientation, tuple[Coordinate, ...]]]:
    """Split cells into contiguous one-dimensional runs, picking the axis with fewer runs (columns on a tie)."""
    cells = list(cells)
    if len(cells) == 1:
        return [(Orientation.SINGLETON, (cells[0],))]
    col_runs = _runs(cells, by_column=True)
    row_runs = _runs(cells, by_column=False)
    if len(row_runs) < len(col_runs):
        runs, orientation = row_runs, Orientation.ROW
    else:
        runs, orientation = col_runs, Orientation.COLUMN
    return [(Orientation.SINGLETON if len(run) == 1 else orientation, run) for run in runs]


def type_based_groups(w: Worksheet) -> tuple[TypeBasedGroup, ...]:
    def key(cell: Cell) -> tuple[CellType, str | None]:
        return cell.cell_type, (cell.formula.r1c1_text if cell.formula is not None else None)

    graph = nx.Graph()
    graph.add_nodes_from(w.cells)
    for coord, cell in w.cells.items():
        for other in (Coordinate(col=coord.col + 1, row=coord.row), Coordinate(col=coord.col, row=coord.row + 1)):
            neighbour = w.cells.get(other)
            if neighbour is not None and key(neighbour) == key(cell):
                graph.add_edge(coord, other)

    groups = []
    for component in nx.connected_components(graph):
        first = w.cells[min(component)]
        cell_type, formula = key(first)
        groups.append(TypeBasedGroup(sheet=w.name, cells=frozenset(component), group_type=cell_type, formula=formula))
    return tuple(sorted(groups, key=lambda g: min(g.cells).key))


def formula_groups(w: Worksheet) -> tuple[TypeBasedGroup, ...]:
    return tuple(g for g in type_based_groups(w) if g.group_type is CellType.FORMULA)


def partition_formula_group(g: TypeBasedGroup) -> tuple[PartitionedFormulaGroup, ...]:
    if g.group_type is not CellType.FORMULA or g.formula is None:
        raise ValueError(f"{g.label} is not a formula group")
    return tuple(
        PartitionedFormulaGroup(sheet=g.sheet, cells=run, orientation=orientation, formula=g.formula)
        for orientation, run in _partition_lines(g.cells)
    )


def _line_groups(sheet: str, cells: set[Coordinate], provenance: tuple[str, int]) -> list[ReferenceBasedGroup]:
    return [
        ReferenceBasedGroup(sheet=sheet, cells=run, orientation=orientation, provenance=(provenance,))
        for orientation, run in _partition_lines(cells)
    ]


def _reference_groups(
    g: PartitionedFormulaGroup, workbook: Workbook
) -> tuple[list[ReferenceBasedGroup], list[Diagnostic]]:
    cells = [workbook.cell(g.sheet, c) for c in g.cells]
    cells = [c for c in cells if c is not None and c.formula is not None]
    if not cells:
        return [], []
    formula = cells[0].formula
    diagnostics: list[Diagnostic] = []
    found: list[ReferenceBasedGroup] = []

    for i, ref in enumerate(formula.cell_refs):
        targets: set[Coordinate] = set()
        target_sheet: str | None = None
        for cell in cells:
            try:
                target_sheet, coord = deref_cell(cell.formula.cell_refs[i], cell, workbook)
            except DereferenceError as e:
                diagnostics.append(Diagnostic(sheet=cell.sheet, addr=cell.coord.a1, message=str(e)))
                continue
            targets.add(coord)
        if targets and target_sheet is not None:
            found.extend(_line_groups(target_sheet, targets, (g.id, i)))

    offset = len(formula.cell_refs)
    for j in range(len(formula.area_refs)):
        for cell in cells:
            try:
                target_sheet, rect = deref_area_used(cell.formula.area_refs[j], cell, workbook)
            except DereferenceError as e:
                diagnostics.append(Diagnostic(sheet=cell.sheet, addr=cell.coord.a1, message=str(e)))
                continue
            if rect is None:
                continue
            found.extend(_line_groups(target_sheet, rect.coords(), (g.id, offset + j)))

    unique: dict[ReferenceBasedGroup, ReferenceBasedGroup] = {}
    for group in found:
        seen = unique.get(group)
        if seen is None:
            unique[group] = group
        else:
            unique[group] = replace(seen, provenance=_union(seen.provenance, group.provenance))
    return sorted(unique.values(), key=_layout_key), diagnostics


def _union(a: Sequence[tuple[str, int]], b: Sequence[tuple[str, int]]) -> tuple[tuple[str, int], ...]:
    return tuple(sorted(set(a) | set(b)))


def reference_groups_of(g: PartitionedFormulaGroup, model: StructureModel) -> tuple[ReferenceBasedGroup, ...]:
    groups, _ = _reference_groups(g, model.workbook)
    return tuple(groups)


def referred_formula_groups(g: PartitionedFormulaGroup, model: StructureModel) -> tuple[PartitionedFormulaGroup, ...]:
    index = model.group_index
    hit: dict[str, PartitionedFormulaGroup] = {}
    for coord in g.cells:
        cell = model.workbook.cell(g.sheet, coord)
        if cell is None or cell.formula is None:
            continue
        targets: set[tuple[str, Coordinate]] = set()
        for ref in cell.formula.cell_refs:
            try:
                targets.add(deref_cell(ref, cell, model.workbook))
            except DereferenceError:
                continue
        for ref in cell.formula.area_refs:
            try:
                sheet, rect = deref_area_used(ref, cell, model.workbook)
            except DereferenceError:
                continue
            if rect is not None:
                targets.update((sheet, c) for c in rect.coords())
        for target in targets:
            other = index.get(target)
            if other is not None and other.id != g.id:
                hit[other.id] = other
    return tuple(sorted(hit.values(), key=model.group_key))


def _line(g: ReferenceBasedGroup) -> tuple[int, int, int]:
    """(line index, span start, span end) along the group's orientation."""
    if g.orientation is Orientation.ROW:
        return g.cells[0].row, g.cells[0].col, g.cells[-1].col
    return g.cells[0].col, g.cells[0].row, g.cells[-1].row


def _merge(groups: Iterable[ReferenceBasedGroup]) -> list[ReferenceBasedGroup]:
    lines: dict[tuple[Orientation, int], list[ReferenceBasedGroup]] = {}
    singletons: dict[Coordinate, ReferenceBasedGroup] = {}
    sheet = None
    for g in groups:
        sheet = g.sheet
        if g.orientation is Orientation.SINGLETON:
            seen = singletons.get(g.cells[0])
            singletons[g.cells[0]] = g if seen is None else replace(seen, provenance=_union(seen.provenance, g.provenance))
        else:
            lines.setdefault((g.orientation, _line(g)[0]), []).append(g)

    merged: list[ReferenceBasedGroup] = []
    for (orientation, index), members in lines.items():
        members.sort(key=lambda g: _line(g)[1:])
        start, end = _line(members[0])[1:]
        provenance = members[0].provenance
        for g in members[1:]:
            s, e = _line(g)[1:]
            if s <= end:
                end = max(end, e)
                provenance = _union(provenance, g.provenance)
                continue
            merged.append(_span_group(sheet, orientation, index, start, end, provenance))
            start, end, provenance = s, e, g.provenance
        merged.append(_span_group(sheet, orientation, index, start, end, provenance))

    for coord, single in singletons.items():
        hosts = [i for i, g in enumerate(merged) if coord in g.cells]
        if not hosts:
            merged.append(single)
            continue
        for i in hosts:
            merged[i] = replace(merged[i], provenance=_union(merged[i].provenance, single.provenance))
    return sorted(merged, key=_layout_key)


def _span_group(
    sheet: str, orientation: Orientation, index: int, start: int, end: int, provenance: tuple[tuple[str, int], ...]
) -> ReferenceBasedGroup:
    if orientation is Orientation.ROW:
        cells = tuple(Coordinate(col=x, row=index) for x in range(start, end + 1))
    else:
        cells = tuple(Coordinate(col=index, row=y) for y in range(start, end + 1))
    return ReferenceBasedGroup(sheet=sheet, cells=cells, orientation=orientation, provenance=provenance)


def merge_reference_groups(groups: Iterable[ReferenceBasedGroup]) -> tuple[ReferenceBasedGroup, ...]:
    """Merge groups of one worksheet: same-line overlapping spans are united, contained singletons absorbed."""
    return tuple(_merge(groups))


def merged_reference_groups(w: Worksheet, model: StructureModel) -> tuple[ReferenceBasedGroup, ...]:
    mine = [g for groups in model.group_references.values() for g in groups if g.sheet == w.name]
    return merge_reference_groups(mine)


def non_blockables(w: Worksheet, model: StructureModel) -> frozenset[Coordinate]:
    structure = model.sheet(w.name)
    grouped = {c for g in chain(structure.partitioned_groups, structure.reference_groups) for c in g.cells}
    return frozenset(c for c in w.cells if c not in grouped)


def _spans_non_blockable(rect: Rect, nonblock: Iterable[Coordinate]) -> bool:
    return any(rect.contains(c) for c in nonblock)


def is_block(cells: Iterable[Coordinate], w: Worksheet, model: StructureModel) -> bool:
    return not (area(cells) & model.sheet(w.name).non_blockables)


def _near(block_cells: set[Coordinate], group_cells: Iterable[Coordinate]) -> bool:
    for c in group_cells:
        for d in (-2, -1, 0, 1, 2):
            if c.col + d >= 1 and Coordinate(col=c.col + d, row=c.row) in block_cells:
                return True
            if c.row + d >= 1 and Coordinate(col=c.col, row=c.row + d) in block_cells:
                return True
    return False


def block_neighbor(b: Block | Iterable[Coordinate], g: Group | Iterable[Coordinate]) -> bool:
    block_cells = b.rect.coords() if isinstance(b, Block) else set(b)
    group_cells = g.cells if isinstance(g, (PartitionedFormulaGroup, ReferenceBasedGroup)) else g
    return _near(block_cells, group_cells)


def create_blocks(sheet: str, groups: Sequence[Group], nonblock: frozenset[Coordinate]) -> tuple[Block, ...]:
    ordered = sorted(groups, key=_layout_key)
    consumed: set[str] = set()
    blocks: list[Block] = []
    for seed in ordered:
        if seed.id in consumed:
            continue
        consumed.add(seed.id)
        cells = set(seed.cells)
        members = {seed.id}
        grown = True
        while grown:
            grown = False
            for g in ordered:
                if g.id in members or not _near(cells, g.cells):
                    continue
                if _spans_non_blockable(Rect.around(chain(cells, g.cells)), nonblock):
                    continue
                cells.update(g.cells)
                members.add(g.id)
                consumed.add(g.id)
                grown = True
        rect = Rect.around(cells)
        blocks.append(Block(sheet=sheet, top_left=rect.top_left, bottom_right=rect.bottom_right, member_groups=tuple(sorted(members))))
    return tuple(sorted(blocks, key=_layout_key))


def blocks(w: Worksheet, model: StructureModel) -> tuple[Block, ...]:
    structure = model.sheet(w.name)
    groups: list[Group] = [*structure.partitioned_groups, *structure.reference_groups]
    return create_blocks(w.name, groups, structure.non_blockables)


def _scan_layers(
    b: Block, others: list[Rect], nonblock: frozenset[Coordinate], orientation: LayerOrientation
) -> list[HeaderLayer]:
    rect = b.rect
    layers: list[HeaderLayer] = []
    if orientation is LayerOrientation.COLUMN:
        positions = range(rect.top - 1, 0, -1)
    else:
        positions = range(rect.left - 1, 0, -1)
    for level, pos in enumerate(positions, start=1):
        if orientation is LayerOrientation.COLUMN:
            span = tuple(Coordinate(col=x, row=pos) for x in range(rect.left, rect.right + 1))
        else:
            span = tuple(Coordinate(col=pos, row=y) for y in range(rect.top, rect.bottom + 1))
        span_rect = Rect(span[0], span[-1])
        if any(other.intersects(span_rect) for other in others):
            break
        if not any(c in nonblock for c in span):
            break
        layers.append(HeaderLayer(block=b.id, orientation=orientation, level=level, cells=span))
    return layers


def header_layers(b: Block, w: Worksheet, model: StructureModel) -> tuple[HeaderLayer, ...]:
    structure = model.sheet(w.name)
    others = [o.rect for o in structure.blocks if o != b]
    return tuple(
        _scan_layers(b, others, structure.non_blockables, LayerOrientation.COLUMN)
        + _scan_layers(b, others, structure.non_blockables, LayerOrientation.ROW)
    )


def _first_filled(w: Worksheet, start: Coordinate, *, upward: bool) -> Coordinate | None:
    col, row = start.col, start.row
    while True:
        if upward:
            row -= 1
        else:
            col -= 1
        if row < 1 or col < 1:
            return None
        coord = Coordinate(col=col, row=row)
        if coord in w.cells:
            return coord


def assign_meta_headers(w: Worksheet, model: StructureModel) -> tuple[tuple[Coordinate, HeaderLayer], ...]:
    structure = model.sheet(w.name)
    in_layers = {c for layer in structure.layers for c in layer.cells}
    candidates = structure.non_blockables - in_layers
    taken: set[Coordinate] = set()
    assigned: list[tuple[Coordinate, HeaderLayer]] = []
    # Row layers first: a cell that heads both a row and a column layer goes to the row layer.
    for orientation in (LayerOrientation.ROW, LayerOrientation.COLUMN):
        for layer in structure.layers:
            if layer.orientation is not orientation:
                continue
            cell = _first_filled(w, layer.cells[0], upward=orientation is LayerOrientation.ROW)
            if cell is None or cell not in candidates or cell in taken:
                continue
            taken.add(cell)
            assigned.append((cell, replace(layer, meta_header=cell)))
    return tuple(sorted(assigned, key=lambda pair: pair[0].key))


def infer_structure(workbook: Workbook) -> StructureModel:
    sheets: dict[str, SheetStructure] = {}
    for ws in workbook.sheets:
        groups = type_based_groups(ws)
        formulas = tuple(g for g in groups if g.group_type is CellType.FORMULA)
        partitioned = tuple(sorted(chain.from_iterable(partition_formula_group(g) for g in formulas), key=_layout_key))
        sheets[ws.name] = SheetStructure(
            name=ws.name, type_groups=groups, formula_groups=formulas, partitioned_groups=partitioned
        )
    model = StructureModel(workbook=workbook, sheets=dict(sheets))

    references: dict[str, tuple[ReferenceBasedGroup, ...]] = {}
    diagnostics: list[Diagnostic] = []
    for g in model.partitioned_groups:
        found, problems = _reference_groups(g, workbook)
        references[g.id] = tuple(found)
        diagnostics.extend(problems)
    model = replace(model, group_references=references, diagnostics=tuple(diagnostics))
    model = replace(model, referred={g.id: referred_formula_groups(g, model) for g in model.partitioned_groups})

    for ws in workbook.sheets:
        sheets[ws.name] = replace(sheets[ws.name], reference_groups=merged_reference_groups(ws, model))
        model = replace(model, sheets=dict(sheets))
        sheets[ws.name] = replace(sheets[ws.name], non_blockables=non_blockables(ws, model))
        model = replace(model, sheets=dict(sheets))
        sheets[ws.name] = replace(sheets[ws.name], blocks=blocks(ws, model))
        model = replace(model, sheets=dict(sheets))
        layers = tuple(chain.from_iterable(header_layers(b, ws, model) for b in sheets[ws.name].blocks))
        sheets[ws.name] = replace(sheets[ws.name], layers=layers)
        model = replace(model, sheets=dict(sheets))
        assigned = assign_meta_headers(ws, model)
        headed = {(layer.block, layer.orientation, layer.level): layer for _, layer in assigned}
        layers = tuple(headed.get((layer.block, layer.orientation, layer.level), layer) for layer in layers)
        sheets[ws.name] = replace(sheets[ws.name], layers=layers, meta_headers=assigned)
        model = replace(model, sheets=dict(sheets))

    if diagnostics:
        log.info("structure_diagnostics source=%s count=%s", workbook.source_path, len(diagnostics))
    return model


def describe_model(model: StructureModel) -> dict:
    """JSON-ready view of a structure model; key order and list order are stable."""

    def coords(cells: Iterable[Coordinate]) -> list[str]:
        return [c.a1 for c in sorted(cells)]

    out: dict = {"source": model.workbook.source_path, "sheets": []}
    for ws in model.workbook.sheets:
        s = model.sheet(ws.name)
        out["sheets"].append(
            {
                "name": ws.name,
                "type_groups": [
                    {"cells": describe_cells(g.cells), "type": g.group_type.value, "formula": g.formula}
                    for g in s.type_groups
                ],
                "formula_groups": [describe_cells(g.cells) for g in s.formula_groups],
                "partitioned_groups": [
                    {
                        "range": g.rect.a1,
                        "orientation": g.orientation.value,
                        "formula": g.formula,
                        "referred": [o.label for o in model.referred.get(g.id, ())],
                        "reference_groups": [r.label for r in model.group_references.get(g.id, ())],
                    }
                    for g in s.partitioned_groups
                ],
                "reference_groups": [
                    {
                        "range": g.rect.a1,
                        "orientation": g.orientation.value,
                        "provenance": [[gid, idx] for gid, idx in g.provenance],
                    }
                    for g in s.reference_groups
                ],
                "non_blockables": coords(s.non_blockables),
                "blocks": [{"range": b.rect.a1, "members": list(b.member_groups)} for b in s.blocks],
                "layers": [
                    {
                        "block": layer.block,
                        "orientation": layer.orientation.value,
                        "level": layer.level,
                        "range": layer.label,
                        "meta_header": layer.meta_header.a1 if layer.meta_header else None,
                    }
                    for layer in s.layers
                ],
                "meta_headers": [[cell.a1, layer.label] for cell, layer in s.meta_headers],
            }
        )
    out["diagnostics"] = [{"sheet": d.sheet, "addr": d.addr, "message": d.message} for d in model.diagnostics]
    return out
