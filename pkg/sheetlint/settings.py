from __future__ import annotations

import os
from dataclasses import dataclass
from os import getenv

from dotenv import load_dotenv


# Local .env fills in anything the process environment leaves unset.
load_dotenv(override=False)


def _env(key: str, default: str | None = None) -> str | None:
    val = getenv(key)
    return val if val not in (None, "") else default


def _env_flag(key: str, default: str = "1") -> bool:
    return (_env(key, default) or default).strip().lower() in ("1", "true", "yes", "on")


def _env_int(key: str, default: int, *, minimum: int = 0) -> int:
    raw = _env(key, None)
    try:
        value = int(raw) if raw is not None else default
    except ValueError:
        value = default
    return max(minimum, value)


@dataclass(frozen=True)
class Settings:
    # App
    app_name: str = _env("SHEETLINT_APP_NAME", "sheetlint") or "sheetlint"
    host: str = _env("HOST", "127.0.0.1") or "127.0.0.1"
    port: int = _env_int("PORT", 8080, minimum=1)
    log_level: str = (_env("SHEETLINT_LOG_LEVEL", "INFO") or "INFO").upper()

    # Evaluation
    threads: int = _env_int("SHEETLINT_THREADS", os.cpu_count() or 1, minimum=1)
    timeout_seconds: float = float(_env("SHEETLINT_TIMEOUT", "300") or "300")
    enable_xlsx: bool = _env_flag("SHEETLINT_ENABLE_XLSX", "1")

    # Evaluation run log
    database_url: str = (
        _env("SHEETLINT_DATABASE_URL", "sqlite+aiosqlite:///./data/sheetlint.db") or "sqlite+aiosqlite:///./data/sheetlint.db"
    )

    # Debug logging (incoming requests)
    log_requests: bool = _env_flag("SHEETLINT_LOG_REQUESTS", "1")
    log_request_body: bool = _env_flag("SHEETLINT_LOG_REQUEST_BODY", "0")


settings = Settings()
