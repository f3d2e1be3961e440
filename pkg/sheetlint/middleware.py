from __future__ import annotations

import json
import logging
import time
from typing import Any, Callable

from starlette.middleware.base import BaseHTTPMiddleware
from starlette.requests import Request
from starlette.responses import Response

from sheetlint.settings import settings


# NOTE: don't use uvicorn.access here; its formatter expects access-log arguments.
logger = logging.getLogger("uvicorn.error")

LOGGED_PREFIX = "/api/v1/"
TIMING_HEADER = "X-Analysis-Ms"


def _body_summary(body_bytes: bytes) -> dict[str, Any] | None:
    """Sheet names and cell counts of a posted workbook document; cell contents are never logged."""
    if not body_bytes:
        return None
    try:
        data = json.loads(body_bytes.decode("utf-8", errors="replace"))
    except Exception:  # noqa: BLE001
        return {"_bytes": len(body_bytes)}
    if not isinstance(data, dict):
        return {"_type": type(data).__name__}
    sheets = data.get("sheets")
    if not isinstance(sheets, list):
        return {"_keys": sorted(data)[:10]}
    return {
        "schema_version": data.get("schema_version"),
        "sheets": {
            str(s.get("name")): len(s.get("cells") or []) for s in sheets if isinstance(s, dict)
        },
    }


class RequestLoggingMiddleware(BaseHTTPMiddleware):
    """Logs one line per analysis POST with its timing and workbook size."""

    async def dispatch(self, request: Request, call_next: Callable[[Request], Any]) -> Response:
        if not settings.log_requests or request.method.upper() != "POST":
            return await call_next(request)
        if not request.url.path.startswith(LOGGED_PREFIX):
            return await call_next(request)

        start = time.perf_counter()
        body = await request.body()

        # downstream handlers read the body again
        async def receive() -> dict:
            return {"type": "http.request", "body": body, "more_body": False}

        status: int | None = None
        try:
            response = await call_next(Request(request.scope, receive))
            status = response.status_code
            response.headers[TIMING_HEADER] = str(int((time.perf_counter() - start) * 1000))
            return response
        finally:
            summary = _body_summary(body) if settings.log_request_body else None
            logger.info(
                "analysis_request path=%s status=%s ms=%d bytes=%d client=%s workbook=%s",
                request.url.path,
                status,
                int((time.perf_counter() - start) * 1000),
                len(body),
                request.client.host if request.client else "-",
                summary,
            )
