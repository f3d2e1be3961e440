from __future__ import annotations

import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from uvicorn.protocols.utils import get_path_with_query_string

from sheetlint import __version__
from sheetlint.api import router as api_router
from sheetlint.middleware import RequestLoggingMiddleware
from sheetlint.settings import settings


# NOTE: don't use uvicorn.access here; its formatter expects access-log arguments.
log = logging.getLogger("uvicorn.error")


@asynccontextmanager
async def lifespan(app: FastAPI):
    log.info("startup app=%s version=%s xlsx=%s", settings.app_name, __version__, settings.enable_xlsx)
    yield


app = FastAPI(
    title=settings.app_name,
    version=__version__,
    lifespan=lifespan,
)

app.add_middleware(RequestLoggingMiddleware)


@app.api_route("/", methods=["GET", "HEAD"], include_in_schema=False)
async def root_health():
    return {"status": "ok"}


@app.exception_handler(RequestValidationError)
async def validation_exception_handler(request: Request, exc: RequestValidationError):
    safe_errors = jsonable_encoder(exc.errors())
    log.info("request_422 %s errors=%s", get_path_with_query_string(request.scope), safe_errors)
    return JSONResponse(status_code=422, content={"detail": safe_errors})


app.include_router(api_router)
