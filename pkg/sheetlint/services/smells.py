from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Hashable, Iterable, Literal, Mapping, Sequence

import networkx as nx

from sheetlint.grid import Cell, CellType, Coordinate, Workbook, Worksheet, cell_type
from sheetlint.services.formula import DereferenceError, deref_area_used, deref_cell, static_result_type
from sheetlint.services.structure import (
    Block,
    Orientation,
    PartitionedFormulaGroup,
    ReferenceBasedGroup,
    StructureModel,
)


log = logging.getLogger("sheetlint")


class SmellKind(str, Enum):
    BASELINE_PATTERN_FINDER = "baseline-pattern-finder"
    BASELINE_LONG_CHAIN = "baseline-long-chain"
    BASELINE_FEATURE_ENVY = "baseline-feature-envy"
    GROUP_PATTERN_FINDER = "group-pattern-finder"
    GROUP_LONG_CHAIN = "group-long-chain"
    GROUP_FEATURE_ENVY = "group-feature-envy"
    OVERBURDENED_WORKSHEET = "overburdened-worksheet"
    INCONSISTENT_GROUP_REFERENCE = "inconsistent-group-reference"
    MISSING_HEADER = "missing-header"


PER_INSTANCE_KINDS = frozenset(
    {
        SmellKind.BASELINE_PATTERN_FINDER,
        SmellKind.GROUP_PATTERN_FINDER,
        SmellKind.INCONSISTENT_GROUP_REFERENCE,
        SmellKind.MISSING_HEADER,
    }
)


class Risk(str, Enum):
    NONE = "none"
    LOW = "low"
    HIGH = "high"


RISK_ORDER = {Risk.NONE: 0, Risk.LOW: 1, Risk.HIGH: 2}


class SubjectKind(str, Enum):
    CELL = "cell"
    GROUP = "group"
    BLOCK = "block"
    WORKSHEET = "worksheet"


class ThresholdError(ValueError):
    pass


@dataclass(frozen=True)
class Band:
    low: float
    high: float
    medium: float | None = None

    def __post_init__(self) -> None:
        if self.low > self.high:
            raise ThresholdError(f"low_risk {self.low} exceeds high_risk {self.high}")
        if self.medium is not None and not (self.low <= self.medium <= self.high):
            raise ThresholdError(f"medium {self.medium} outside [{self.low}, {self.high}]")


DEFAULT_BANDS: dict[str, Band] = {
    SmellKind.BASELINE_LONG_CHAIN.value: Band(low=4, high=7),
    SmellKind.GROUP_LONG_CHAIN.value: Band(low=4, high=7),
    SmellKind.BASELINE_FEATURE_ENVY.value: Band(low=3, high=7),
    SmellKind.GROUP_FEATURE_ENVY.value: Band(low=3, high=7),
    "overburdened-blocks": Band(low=4, high=9, medium=5),
    "overburdened-groups": Band(low=11, high=37, medium=19),
}


@dataclass(frozen=True)
class Thresholds:
    bands: Mapping[str, Band] = field(default_factory=lambda: dict(DEFAULT_BANDS))

    def band(self, key: str) -> Band:
        try:
            return self.bands[key]
        except KeyError as e:
            raise ThresholdError(f"no thresholds configured for {key}") from e

    def merged(self, overrides: Mapping[str, Band]) -> Thresholds:
        return Thresholds(bands={**self.bands, **overrides})


DEFAULT_THRESHOLDS = Thresholds()


def threshold_key(kind: SmellKind | str, metric: str = "blocks") -> str:
    value = kind.value if isinstance(kind, SmellKind) else kind
    if value == SmellKind.OVERBURDENED_WORKSHEET.value:
        return f"overburdened-{metric}"
    return value


def classify(value: float, kind: SmellKind | str, t: Thresholds = DEFAULT_THRESHOLDS) -> Risk:
    key = threshold_key(kind)
    if key in {k.value for k in PER_INSTANCE_KINDS}:
        raise ThresholdError("kind is per-instance")
    band = t.band(key)
    if value >= band.high:
        return Risk.HIGH
    if value >= band.low:
        return Risk.LOW
    return Risk.NONE


@dataclass(frozen=True)
class SmellReport:
    kind: SmellKind
    subject_kind: SubjectKind
    subject: str
    worksheet: str
    metric_value: float
    risk: Risk | None = None
    detail: str = ""
    variant: str = ""

    @property
    def sort_key(self) -> tuple:
        return (self.kind.value, self.variant, self.worksheet, self.subject)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "variant": self.variant,
            "subject_kind": self.subject_kind.value,
            "subject": self.subject,
            "worksheet": self.worksheet,
            "metric_value": self.metric_value,
            "risk": self.risk.value if self.risk else None,
            "detail": self.detail,
        }


class PatternOrientation(str, Enum):
    COLUMN = "column"
    ROW = "row"
    COMBINED = "combined"


@dataclass(frozen=True)
class PatternFinderVariant:
    orientation: PatternOrientation = PatternOrientation.COLUMN
    include_border: bool = False
    evaluated_types: bool = True

    @property
    def tag(self) -> str:
        return f"{self.orientation.value}+border" if self.include_border else self.orientation.value


PATTERN_FINDER_VARIANTS = tuple(
    PatternFinderVariant(orientation=o, include_border=b) for b in (False, True) for o in PatternOrientation
)

WINDOW = 4
UNIQUENESS_DISTANCE = 5
BORDER_LINES = 5


def _deviants(line: Sequence[CellType | None]) -> set[int]:
    """0-based positions that are the single odd type of some full window and unique within the distance."""
    flagged: set[int] = set()
    n = len(line)
    for start in range(0, n - WINDOW + 1):
        window = line[start : start + WINDOW]
        if any(t is None or t is CellType.EMPTY for t in window):
            continue
        for k, t in enumerate(window):
            rest = window[:k] + window[k + 1 :]
            if not (rest[0] == rest[1] == rest[2]) or t == rest[0]:
                continue
            pos = start + k
            lo, hi = max(0, pos - UNIQUENESS_DISTANCE), min(n - 1, pos + UNIQUENESS_DISTANCE)
            if all(line[j] != t for j in range(lo, hi + 1) if j != pos):
                flagged.add(pos)
    return flagged


def _pattern_cells(w: Worksheet, *, by_column: bool, include_border: bool, evaluated: bool) -> set[Coordinate]:
    bounds = w.bounds
    if bounds is None:
        return set()

    def type_at(coord: Coordinate) -> CellType | None:
        cell = w.get(coord)
        return static_result_type(cell) if evaluated else cell_type(cell)

    lines, length = (bounds.col, bounds.row) if by_column else (bounds.row, bounds.col)
    flagged: set[Coordinate] = set()
    for line in range(1, lines + 1):
        if by_column:
            coords = [Coordinate(col=line, row=p) for p in range(1, length + 1)]
        else:
            coords = [Coordinate(col=p, row=line) for p in range(1, length + 1)]
        for pos in _deviants([type_at(c) for c in coords]):
            index = pos + 1
            if not include_border and (index <= BORDER_LINES or index > length - BORDER_LINES):
                continue
            flagged.add(coords[pos])
    return flagged


def baseline_pattern_finder(w: Worksheet, v: PatternFinderVariant = PatternFinderVariant()) -> list[SmellReport]:
    kwargs = {"include_border": v.include_border, "evaluated": v.evaluated_types}
    if v.orientation is PatternOrientation.COLUMN:
        cells = _pattern_cells(w, by_column=True, **kwargs)
    elif v.orientation is PatternOrientation.ROW:
        cells = _pattern_cells(w, by_column=False, **kwargs)
    else:
        cells = _pattern_cells(w, by_column=True, **kwargs) & _pattern_cells(w, by_column=False, **kwargs)

    reports = []
    for coord in sorted(cells):
        cell = w.get(coord)
        found = static_result_type(cell) if v.evaluated_types else cell_type(cell)
        reports.append(
            SmellReport(
                kind=SmellKind.BASELINE_PATTERN_FINDER,
                subject_kind=SubjectKind.CELL,
                subject=f"{w.name}!{coord.a1}",
                worksheet=w.name,
                metric_value=1,
                detail=f"{found.value if found else 'unknown'} breaks the surrounding pattern",
                variant=v.tag,
            )
        )
    return reports


def _group_types(model: StructureModel, g: ReferenceBasedGroup, evaluated: bool) -> set[CellType]:
    types: set[CellType] = set()
    for coord in g.cells:
        cell = model.workbook.cell(g.sheet, coord)
        found = static_result_type(cell) if evaluated else cell_type(cell)
        if found is not None:
            types.add(found)
    return types


def group_pattern_finder(w: Worksheet, model: StructureModel, evaluated: bool = False) -> list[SmellReport]:
    reports = []
    for g in model.sheet(w.name).reference_groups:
        types = _group_types(model, g, evaluated)
        if len(types) < 2:
            continue
        reports.append(
            SmellReport(
                kind=SmellKind.GROUP_PATTERN_FINDER,
                subject_kind=SubjectKind.GROUP,
                subject=g.label,
                worksheet=w.name,
                metric_value=len(types),
                detail="mixed types: " + ", ".join(sorted(t.value for t in types)),
                variant="evaluated" if evaluated else "raw",
            )
        )
    return reports


@dataclass(frozen=True)
class ChainAnalysis:
    lengths: Mapping[Hashable, int]
    witnesses: Mapping[Hashable, tuple[str, ...]]
    cyclic: bool


def _longest_chains(graph: nx.DiGraph, base: Callable[[Hashable], int]) -> tuple[dict[Hashable, int], bool]:
    """Longest chain per node; edges inside a strongly connected component contribute nothing."""
    condensed = nx.condensation(graph)
    mapping = condensed.graph["mapping"]
    cyclic = any(len(condensed.nodes[n]["members"]) > 1 for n in condensed) or nx.number_of_selfloops(graph) > 0
    value: dict[int, int] = {}
    for scc in reversed(list(nx.topological_sort(condensed))):
        best = 0
        for member in condensed.nodes[scc]["members"]:
            outside = [value[mapping[t]] for t in graph.successors(member) if mapping[t] != scc]
            best = max(best, 1 + max(outside) if outside else base(member))
        value[scc] = best
    return {n: value[mapping[n]] for n in graph}, cyclic


def _witness(graph: nx.DiGraph, lengths: Mapping[Hashable, int], start: Hashable, order_key) -> list[Hashable]:
    path = [start]
    seen = {start}
    node = start
    while True:
        nxt = [t for t in graph.successors(node) if t not in seen]
        if not nxt:
            return path
        node = min(nxt, key=lambda t: (-lengths[t], order_key(t)))
        seen.add(node)
        path.append(node)


def _cell_graph(workbook: Workbook) -> nx.DiGraph:
    """Formula cells point at the cells they reference. Nodes that resolved any reference are kept in "referencing"."""
    graph = nx.DiGraph(referencing=set())
    for cell in workbook.iter_cells():
        if cell.formula is None:
            continue
        node = (cell.sheet, cell.coord)
        graph.add_node(node)
        for ref in cell.formula.cell_refs:
            try:
                graph.add_edge(node, deref_cell(ref, cell, workbook))
            except DereferenceError:
                continue
            graph.graph["referencing"].add(node)
        for ref in cell.formula.area_refs:
            try:
                sheet, rect = deref_area_used(ref, cell, workbook)
            except DereferenceError:
                continue
            graph.graph["referencing"].add(node)
            if rect is not None:
                graph.add_edges_from((node, (sheet, c)) for c in rect.coords())
    return graph


def cell_chains(workbook: Workbook) -> ChainAnalysis:
    """Chain lengths and witnesses for every formula cell, computed once per workbook instance."""
    cached = workbook.memo.get("cell_chains")
    if cached is None:
        cached = workbook.memo["cell_chains"] = _cell_chains(workbook)
    return cached


def _cell_chains(workbook: Workbook) -> ChainAnalysis:
    graph = _cell_graph(workbook)
    referencing = graph.graph["referencing"]

    def base(node: Hashable) -> int:
        return 1 if node in referencing else 0

    def order_key(node: Hashable) -> tuple:
        sheet, coord = node
        return (workbook.sheet_index(sheet), coord.row, coord.col)

    lengths, cyclic = _longest_chains(graph, base)
    if cyclic:
        log.info("circular_references source=%s", workbook.source_path)
    witnesses = {}
    for node in graph:
        if lengths[node]:
            path = _witness(graph, lengths, node, order_key)
            witnesses[node] = tuple(f"{s}!{c.a1}" for s, c in reversed(path))
    return ChainAnalysis(lengths=lengths, witnesses=witnesses, cyclic=cyclic)


def baseline_chain_length(c: Cell, workbook: Workbook) -> int:
    if c.formula is None:
        return 0
    return cell_chains(workbook).lengths.get((c.sheet, c.coord), 0)


def group_chains(model: StructureModel) -> ChainAnalysis:
    cached = model.memo.get("group_chains")
    if cached is None:
        cached = model.memo["group_chains"] = _group_chains(model)
    return cached


def _group_chains(model: StructureModel) -> ChainAnalysis:
    graph = nx.DiGraph()
    for g in model.partitioned_groups:
        graph.add_node(g.id)
        graph.add_edges_from((g.id, o.id) for o in model.referred.get(g.id, ()))

    def base(gid: Hashable) -> int:
        return 1 if model.referred.get(gid) or model.group_references.get(gid) else 0

    def order_key(gid: Hashable) -> tuple:
        return model.group_key(model.groups_by_id[gid])

    lengths, cyclic = _longest_chains(graph, base)
    if cyclic:
        log.info("circular_group_references source=%s", model.workbook.source_path)
    witnesses = {}
    for gid in graph:
        if not lengths[gid]:
            continue
        nodes = _witness(graph, lengths, gid, order_key)
        path = [model.groups_by_id[n].label for n in nodes]
        refs = model.group_references.get(nodes[-1], ())
        if refs:
            path.append(min(refs, key=model.group_key).label)
        witnesses[gid] = tuple(reversed(path))
    return ChainAnalysis(lengths=lengths, witnesses=witnesses, cyclic=cyclic)


def group_longest_chain(g: PartitionedFormulaGroup, model: StructureModel) -> int:
    return group_chains(model).lengths.get(g.id, 0)


def baseline_feature_envy(w: Worksheet, workbook: Workbook | None = None) -> int:
    count = 0
    for cell in w.iter_cells():
        if cell.formula is None:
            continue
        for ref in (*cell.formula.cell_refs, *cell.formula.area_refs):
            if ref.sheet is None or ref.sheet == w.name:
                continue
            if workbook is not None and workbook.sheet(ref.sheet) is None:
                continue
            count += 1
    return count


def group_feature_envy(w: Worksheet, model: StructureModel) -> int:
    return sum(
        1
        for g in model.sheet(w.name).partitioned_groups
        for r in model.group_references.get(g.id, ())
        if r.sheet != w.name
    )


OverburdenedMetric = Literal["blocks", "groups", "reference-groups"]


def overburdened_worksheet(w: Worksheet, model: StructureModel, metric: OverburdenedMetric = "blocks") -> int:
    structure = model.sheet(w.name)
    if metric == "blocks":
        return len(structure.blocks)
    if metric == "groups":
        return len(structure.formula_groups)
    if metric == "reference-groups":
        return len(structure.reference_groups)
    raise ValueError(f"unknown overburdened metric: {metric}")


def _aligned(r: ReferenceBasedGroup, g: PartitionedFormulaGroup) -> bool:
    if Orientation.SINGLETON in (r.orientation, g.orientation):
        return True
    return r.orientation == g.orientation


InconsistencyMode = Literal["aligned", "literal"]


def inconsistent_pairs(
    model: StructureModel, mode: InconsistencyMode = "aligned"
) -> list[tuple[PartitionedFormulaGroup, PartitionedFormulaGroup]]:
    pairs = []
    for g in model.partitioned_groups:
        refs = model.group_references.get(g.id, ())
        if not refs:
            continue
        for other in model.partitioned_groups:
            if other.id == g.id:
                continue
            target = set(other.cells)
            touching = [r for r in refs if r.sheet == other.sheet and target & set(r.cells)]
            if not touching or any(set(r.cells) == target for r in touching):
                continue
            if mode == "aligned" and not any(_aligned(r, other) and not target <= set(r.cells) for r in touching):
                continue
            pairs.append((g, other))
    return pairs


def inconsistent_group_references(
    workbook: Workbook, model: StructureModel, mode: InconsistencyMode = "aligned"
) -> list[SmellReport]:
    return [
        SmellReport(
            kind=SmellKind.INCONSISTENT_GROUP_REFERENCE,
            subject_kind=SubjectKind.GROUP,
            subject=g.label,
            worksheet=g.sheet,
            metric_value=1,
            detail=f"inconsistently refers to {other.label}",
        )
        for g, other in inconsistent_pairs(model, mode)
    ]


HeaderLevels = Literal["lowest", "all"]


def missing_headers(b: Block, model: StructureModel, levels: HeaderLevels = "lowest") -> tuple[Coordinate, ...]:
    """Empty cells in the header layers of a block.

    The default "lowest" checks only the level-1 layers next to the block body. "all" checks
    the union of every header layer of the block, which also reports gaps in higher header rows
    such as a partly filled category line above the column headers.
    """
    ws = model.workbook.sheet(b.sheet)
    missing = set()
    for layer in model.sheet(b.sheet).layers:
        if layer.block != b.id or (levels == "lowest" and layer.level != 1):
            continue
        missing.update(c for c in layer.cells if ws.get(c) is None)
    return tuple(sorted(missing))


@dataclass(frozen=True)
class SmellConfig:
    thresholds: Thresholds = DEFAULT_THRESHOLDS
    pattern_variant: PatternFinderVariant = PatternFinderVariant()
    group_pattern_evaluated: bool = False
    overburdened_metric: OverburdenedMetric = "blocks"
    missing_header_levels: HeaderLevels = "lowest"
    inconsistency_mode: InconsistencyMode = "aligned"


def _thresholded(
    kind: SmellKind,
    subject_kind: SubjectKind,
    subject: str,
    worksheet: str,
    value: float,
    config: SmellConfig,
    *,
    key: str | None = None,
    detail: str = "",
    variant: str = "",
) -> SmellReport | None:
    key = key or kind.value
    if key not in config.thresholds.bands:
        if not value:
            return None
        return SmellReport(kind, subject_kind, subject, worksheet, value, None, detail, variant)
    risk = classify(value, key, config.thresholds)
    if risk is Risk.NONE:
        return None
    return SmellReport(kind, subject_kind, subject, worksheet, value, risk, detail, variant)


def detect_smells(
    workbook: Workbook,
    model: StructureModel,
    kinds: Iterable[SmellKind] = tuple(SmellKind),
    config: SmellConfig = SmellConfig(),
) -> list[SmellReport]:
    kinds = set(kinds)
    reports: list[SmellReport | None] = []

    for ws in workbook.sheets:
        if SmellKind.BASELINE_PATTERN_FINDER in kinds:
            reports.extend(baseline_pattern_finder(ws, config.pattern_variant))
        if SmellKind.GROUP_PATTERN_FINDER in kinds:
            reports.extend(group_pattern_finder(ws, model, config.group_pattern_evaluated))
        if SmellKind.BASELINE_FEATURE_ENVY in kinds:
            value = baseline_feature_envy(ws, workbook)
            reports.append(
                _thresholded(SmellKind.BASELINE_FEATURE_ENVY, SubjectKind.WORKSHEET, ws.name, ws.name, value, config)
            )
        if SmellKind.GROUP_FEATURE_ENVY in kinds:
            value = group_feature_envy(ws, model)
            reports.append(
                _thresholded(SmellKind.GROUP_FEATURE_ENVY, SubjectKind.WORKSHEET, ws.name, ws.name, value, config)
            )
        if SmellKind.OVERBURDENED_WORKSHEET in kinds:
            metric = config.overburdened_metric
            value = overburdened_worksheet(ws, model, metric)
            reports.append(
                _thresholded(
                    SmellKind.OVERBURDENED_WORKSHEET,
                    SubjectKind.WORKSHEET,
                    ws.name,
                    ws.name,
                    value,
                    config,
                    key=threshold_key(SmellKind.OVERBURDENED_WORKSHEET, metric),
                    variant=metric,
                )
            )
        if SmellKind.MISSING_HEADER in kinds:
            for b in model.sheet(ws.name).blocks:
                missing = missing_headers(b, model, config.missing_header_levels)
                if missing:
                    reports.append(
                        SmellReport(
                            kind=SmellKind.MISSING_HEADER,
                            subject_kind=SubjectKind.BLOCK,
                            subject=b.label,
                            worksheet=ws.name,
                            metric_value=len(missing),
                            detail="missing " + ", ".join(c.a1 for c in missing),
                        )
                    )

    if SmellKind.BASELINE_LONG_CHAIN in kinds:
        chains = cell_chains(workbook)
        for (sheet, coord), value in sorted(chains.lengths.items(), key=lambda kv: (workbook.sheet_index(kv[0][0]), kv[0][1].key)):
            cell = workbook.cell(sheet, coord)
            if cell is None or cell.formula is None:
                continue
            reports.append(
                _thresholded(
                    SmellKind.BASELINE_LONG_CHAIN,
                    SubjectKind.CELL,
                    f"{sheet}!{coord.a1}",
                    sheet,
                    value,
                    config,
                    detail=" -> ".join(chains.witnesses.get((sheet, coord), ())),
                )
            )
    if SmellKind.GROUP_LONG_CHAIN in kinds:
        chains = group_chains(model)
        for g in model.partitioned_groups:
            reports.append(
                _thresholded(
                    SmellKind.GROUP_LONG_CHAIN,
                    SubjectKind.GROUP,
                    g.label,
                    g.sheet,
                    chains.lengths.get(g.id, 0),
                    config,
                    detail=" -> ".join(chains.witnesses.get(g.id, ())),
                )
            )
    if SmellKind.INCONSISTENT_GROUP_REFERENCE in kinds:
        reports.extend(inconsistent_group_references(workbook, model, config.inconsistency_mode))

    return sorted((r for r in reports if r is not None), key=lambda r: r.sort_key)


@dataclass(frozen=True)
class Measurement:
    tag: str
    worksheet: str
    subject: str
    value: float
    threshold_key: str | None = None


def _tag(kind: SmellKind, variant: str = "") -> str:
    return f"{kind.value}[{variant}]" if variant else kind.value


def measure(
    workbook: Workbook,
    model: StructureModel,
    kinds: Iterable[SmellKind] = tuple(SmellKind),
    config: SmellConfig = SmellConfig(),
) -> list[Measurement]:
    """Per-entity metric values for every selected kind and all of its variants."""
    kinds = set(kinds)
    out: list[Measurement] = []

    for ws in workbook.sheets:
        if SmellKind.BASELINE_PATTERN_FINDER in kinds:
            for variant in PATTERN_FINDER_VARIANTS:
                count = len(baseline_pattern_finder(ws, variant))
                out.append(Measurement(_tag(SmellKind.BASELINE_PATTERN_FINDER, variant.tag), ws.name, ws.name, count))
        if SmellKind.GROUP_PATTERN_FINDER in kinds:
            for evaluated in (False, True):
                count = len(group_pattern_finder(ws, model, evaluated))
                tag = _tag(SmellKind.GROUP_PATTERN_FINDER, "evaluated" if evaluated else "raw")
                out.append(Measurement(tag, ws.name, ws.name, count))
        if SmellKind.BASELINE_FEATURE_ENVY in kinds:
            key = SmellKind.BASELINE_FEATURE_ENVY.value
            out.append(Measurement(key, ws.name, ws.name, baseline_feature_envy(ws, workbook), key))
        if SmellKind.GROUP_FEATURE_ENVY in kinds:
            key = SmellKind.GROUP_FEATURE_ENVY.value
            out.append(Measurement(key, ws.name, ws.name, group_feature_envy(ws, model), key))
        if SmellKind.OVERBURDENED_WORKSHEET in kinds:
            for metric in ("blocks", "groups", "reference-groups"):
                key = threshold_key(SmellKind.OVERBURDENED_WORKSHEET, metric)
                out.append(
                    Measurement(
                        _tag(SmellKind.OVERBURDENED_WORKSHEET, metric),
                        ws.name,
                        ws.name,
                        overburdened_worksheet(ws, model, metric),
                        key if key in config.thresholds.bands else None,
                    )
                )
        if SmellKind.MISSING_HEADER in kinds:
            count = sum(len(missing_headers(b, model, config.missing_header_levels)) for b in model.sheet(ws.name).blocks)
            out.append(Measurement(SmellKind.MISSING_HEADER.value, ws.name, ws.name, count))

    if SmellKind.INCONSISTENT_GROUP_REFERENCE in kinds:
        pairs = inconsistent_pairs(model, config.inconsistency_mode)
        for ws in workbook.sheets:
            count = sum(1 for g, _ in pairs if g.sheet == ws.name)
            out.append(Measurement(SmellKind.INCONSISTENT_GROUP_REFERENCE.value, ws.name, ws.name, count))
    if SmellKind.BASELINE_LONG_CHAIN in kinds:
        key = SmellKind.BASELINE_LONG_CHAIN.value
        lengths = cell_chains(workbook).lengths
        for cell in workbook.iter_cells():
            if cell.formula is not None:
                out.append(Measurement(key, cell.sheet, cell.ref, lengths.get((cell.sheet, cell.coord), 0), key))
    if SmellKind.GROUP_LONG_CHAIN in kinds:
        key = SmellKind.GROUP_LONG_CHAIN.value
        lengths = group_chains(model).lengths
        for g in model.partitioned_groups:
            out.append(Measurement(key, g.sheet, g.label, lengths.get(g.id, 0), key))
    return out
