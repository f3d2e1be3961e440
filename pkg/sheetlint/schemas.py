from __future__ import annotations

import json
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from sheetlint.grid import CellType, Coordinate, GridError, scalar_type


SCHEMA_VERSION = 1

Scalar = bool | int | float | str


def _parse_json_string(data: Any) -> Any:
    """Accept a JSON document passed as bytes or as a string as well as an already-parsed object."""
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8", errors="replace")
    if isinstance(data, str):
        try:
            return json.loads(data.strip())
        except Exception:  # noqa: BLE001
            return data
    return data


def _value_fits(cell_type: CellType, value: Scalar) -> bool:
    # any text may be stored as a string, including error-like literals
    if cell_type is CellType.STRING:
        return isinstance(value, str)
    return scalar_type(value) is cell_type


class CellDocument(BaseModel):
    addr: str = Field(..., description="A1 address of the cell, e.g. B5")
    type: CellType
    value: Scalar | None = Field(default=None, description="Stored constant for non-formula cells")
    formula: str | None = Field(default=None, description="Formula in A1 notation, leading '=' optional")
    cached: Scalar | None = Field(default=None, description="Last evaluated value, if known")

    @field_validator("addr")
    @classmethod
    def _valid_addr(cls, v: str) -> str:
        try:
            return Coordinate.parse(v).a1
        except GridError as e:
            raise ValueError(str(e)) from e

    @model_validator(mode="after")
    def _formula_iff_type(self) -> CellDocument:
        if self.type is CellType.EMPTY:
            raise ValueError(f"{self.addr}: empty cells are not stored")
        if self.type is CellType.FORMULA and not self.formula:
            raise ValueError(f"{self.addr}: type formula requires formula text")
        if self.type is not CellType.FORMULA and self.formula is not None:
            raise ValueError(f"{self.addr}: formula given for type {self.type.value}")
        if self.type is CellType.FORMULA and self.value is not None:
            raise ValueError(f"{self.addr}: formula cells carry no literal value")
        if self.type is not CellType.FORMULA:
            if self.value is None:
                raise ValueError(f"{self.addr}: type {self.type.value} requires a value")
            if not _value_fits(self.type, self.value):
                raise ValueError(f"{self.addr}: value {self.value!r} does not fit type {self.type.value}")
        return self


class SheetDocument(BaseModel):
    name: str = Field(..., min_length=1, max_length=255)
    cells: list[CellDocument] = Field(default_factory=list)

    @model_validator(mode="after")
    def _unique_addresses(self) -> SheetDocument:
        seen: set[str] = set()
        for cell in self.cells:
            if cell.addr in seen:
                raise ValueError(f"{self.name}!{cell.addr}: duplicate address")
            seen.add(cell.addr)
        return self


class WorkbookDocument(BaseModel):
    schema_version: int = Field(default=SCHEMA_VERSION, ge=1, le=SCHEMA_VERSION)
    sheets: list[SheetDocument] = Field(default_factory=list)

    @model_validator(mode="before")
    @classmethod
    def _parse_json_string_body(cls, data: Any):
        return _parse_json_string(data)

    @model_validator(mode="after")
    def _unique_sheets(self) -> WorkbookDocument:
        names = [s.name for s in self.sheets]
        if len(names) != len(set(names)):
            raise ValueError(f"worksheet names must be unique: {names}")
        return self


class BandConfig(BaseModel):
    low: float = Field(..., ge=0)
    high: float = Field(..., ge=0)
    medium: float | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _ordered(self) -> BandConfig:
        if self.low > self.high:
            raise ValueError("low must not exceed high")
        return self


class SmellOptions(BaseModel):
    pattern_orientation: Literal["column", "row", "combined"] = "column"
    pattern_include_border: bool = False
    pattern_evaluated_types: bool = True
    group_pattern_evaluated: bool = False
    overburdened_metric: Literal["blocks", "groups", "reference-groups"] = "blocks"
    missing_header_levels: Literal["lowest", "all"] = "lowest"
    inconsistency_mode: Literal["aligned", "literal"] = "aligned"


class ThresholdsDocument(BaseModel):
    thresholds: dict[str, BandConfig] = Field(default_factory=dict)
    options: SmellOptions = Field(default_factory=SmellOptions)

    @model_validator(mode="before")
    @classmethod
    def _parse_json_string_body(cls, data: Any):
        return _parse_json_string(data)


class EvalConfigDocument(BaseModel):
    corpus: str | None = Field(default=None, description="Corpus directory; the CLI argument wins")
    detectors: list[str] | None = Field(default=None, description="Smell kinds to run; all when omitted")
    timeout_seconds: float | None = Field(default=None, gt=0, description="Per-file limit; 300 s by default")
    thresholds: dict[str, BandConfig] = Field(default_factory=dict)
    options: SmellOptions = Field(default_factory=SmellOptions)
    output_dir: str = Field(default="./eval-out")
    workers: int | None = Field(default=None, ge=0, description="0 runs files on a single worker process")
    preprocess_filter: Literal["complete", "readable-only", "has-formulas"] | None = "complete"
    quartile_step: int = Field(default=1, ge=1, le=100)
    database_url: str | None = Field(default=None, description="Async SQLAlchemy URL for the run log")

    @model_validator(mode="before")
    @classmethod
    def _parse_json_string_body(cls, data: Any):
        return _parse_json_string(data)


class PreprocessReport(BaseModel):
    directory: str
    filter: Literal["complete", "readable-only", "has-formulas"]
    total_files: int = 0
    excluded_unreadable: int = 0
    excluded_unprocessable: int = 0
    excluded_no_formulas: int = 0
    accepted: list[str] = Field(default_factory=list)
    reasons: dict[str, str] = Field(default_factory=dict, description="Excluded file -> reason")

    @model_validator(mode="after")
    def _counts_add_up(self) -> PreprocessReport:
        excluded = self.excluded_unreadable + self.excluded_unprocessable + self.excluded_no_formulas
        if self.total_files != len(self.accepted) + excluded:
            raise ValueError("total_files must equal accepted plus exclusions")
        return self


class SmellReportOut(BaseModel):
    kind: str
    variant: str = ""
    subject_kind: str
    subject: str
    worksheet: str
    metric_value: float
    risk: str | None = None
    detail: str = ""


class FileOutcomeOut(BaseModel):
    file: str
    status: str
    seconds: float
    records: int
    error: str | None = None

    model_config = ConfigDict(from_attributes=True)
