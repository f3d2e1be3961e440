"""
Compatibility entrypoint for platforms that expect `uvicorn main:app`.

Actual application lives in `sheetlint/main.py` as `sheetlint.main:app`.
"""

from sheetlint.main import app  # noqa: F401
