from __future__ import annotations

from itertools import groupby
from pathlib import Path

from jinja2 import Environment, FileSystemLoader, StrictUndefined


TEMPLATES_DIR = Path(__file__).resolve().parent.parent / "templates"


def format_number(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if value.is_integer():
            return str(int(value))
        return f"{value:.2f}"
    return str(value)


_env = Environment(
    loader=FileSystemLoader(str(TEMPLATES_DIR)),
    autoescape=False,
    undefined=StrictUndefined,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)
_env.filters["num"] = format_number


def render(name: str, **params) -> str:
    return _env.get_template(name).render(**params)


def render_model(model: dict) -> str:
    return render("analyze.txt.j2", model=model)


def render_reports(reports: list[dict]) -> str:
    groups = [(kind, list(items)) for kind, items in groupby(reports, key=lambda r: r["kind"])]
    return render("smells.txt.j2", groups=groups, total=len(reports))


def render_summary(summary: dict) -> str:
    return render("summary.txt.j2", s=summary)
