from __future__ import annotations

import logging

from fastapi import APIRouter, HTTPException, Request
from pydantic import ValidationError
from sqlalchemy import select

from sheetlint.db import create_engine, init_db, session_scope
from sheetlint.grid import Workbook
from sheetlint.models import EvaluationRun, FileOutcome
from sheetlint.schemas import FileOutcomeOut, SmellReportOut, WorkbookDocument
from sheetlint.services.evaluation import ConfigError, parse_detectors
from sheetlint.services.ingestion import IngestionError, build_workbook
from sheetlint.services.smells import SmellConfig, SmellKind, detect_smells
from sheetlint.services.structure import describe_model, infer_structure
from sheetlint.settings import settings


router = APIRouter(prefix="/api/v1", tags=["api"])
log = logging.getLogger("uvicorn.error")


async def _workbook_from_request(request: Request) -> Workbook:
    payload = await request.body()
    try:
        doc = WorkbookDocument.model_validate(payload)
    except ValidationError as e:
        raise HTTPException(status_code=422, detail=e.errors(include_url=False, include_context=False)) from e
    try:
        return build_workbook(doc)
    except IngestionError as e:
        log.info("workbook_rejected sheet=%s addr=%s error=%s", e.sheet, e.addr, e)
        raise HTTPException(status_code=422, detail={"sheet": e.sheet, "addr": e.addr, "message": str(e)}) from e


@router.get("/health")
async def health() -> dict:
    return {"status": "ok"}


@router.get("/detectors")
async def detectors() -> list[str]:
    return [k.value for k in SmellKind]


@router.post("/analyze")
async def analyze(request: Request) -> dict:
    workbook = await _workbook_from_request(request)
    return describe_model(infer_structure(workbook))


@router.post("/smells", response_model=list[SmellReportOut])
async def smells(request: Request, detectors: str | None = None) -> list[SmellReportOut]:
    try:
        kinds = parse_detectors(detectors.split(",")) if detectors else tuple(SmellKind)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=str(e)) from e
    workbook = await _workbook_from_request(request)
    model = infer_structure(workbook)
    reports = detect_smells(workbook, model, kinds, SmellConfig())
    log.info("smells_done sheets=%s reports=%s", len(workbook.sheets), len(reports))
    return [SmellReportOut(**r.to_dict()) for r in reports]


@router.get("/runs/{run_id}/outcomes", response_model=list[FileOutcomeOut])
async def run_outcomes(run_id: int) -> list[FileOutcome]:
    engine = create_engine(settings.database_url)
    try:
        await init_db(engine)
        async with session_scope(engine) as session:
            if await session.get(EvaluationRun, run_id) is None:
                raise HTTPException(status_code=404, detail=f"Evaluation run {run_id} not found")
            res = await session.execute(
                select(FileOutcome).where(FileOutcome.run_id == run_id).order_by(FileOutcome.file)
            )
            return list(res.scalars())
    finally:
        await engine.dispose()
