"""Experiment reports and their byte-stable CSV/JSON serialization.

Floats are written with 17 significant digits, which round-trips every
IEEE double, so identical reports produce identical bytes on every
platform. NaN and infinite values are refused: failed measurements must
be recorded explicitly upstream, never as placeholders.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from numbers import Integral, Real

from deltashock.errors import DataError, IoError


@dataclass
class ExperimentReport:
    """One table of rows plus metadata and pass/fail flags.

    ``errors`` lists samples whose measurement raised (time or sweep
    value with the message) instead of filling the table with NaNs.
    """

    mode: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    errors: list[dict] = field(default_factory=list)

    def column(self, name):
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "metadata": self.metadata,
            "flags": self.flags,
            "columns": list(self.columns),
            "rows": [list(r) for r in self.rows],
            "errors": self.errors,
        }


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise DataError(f"refusing to serialize non-finite value {x!r}")
    return format(x, ".17g")


def _scalar(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Integral):
        return str(int(value))
    if isinstance(value, Real):
        return format_float(value)
    return str(value)


def _json(value, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if value is None or isinstance(value, (bool, str)):
        return json.dumps(value)
    if isinstance(value, Integral):
        return str(int(value))
    if isinstance(value, Real):
        return format_float(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json(v, indent + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in value):
            return "[" + ", ".join(_json(v) for v in value) + "]"
        return "[\n" + ",\n".join(pad + _json(v, indent + 1) for v in value) + "\n" + end + "]"
    raise DataError(f"cannot serialize {type(value).__name__}")


def render(report: ExperimentReport, fmt: str) -> str:
    if fmt == "json":
        return _json(report.to_dict()) + "\n"
    if fmt != "csv":
        raise DataError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(report.columns)
    for row in report.rows:
        if len(row) != len(report.columns):
            raise DataError(f"row has {len(row)} entries for {len(report.columns)} columns")
        writer.writerow([_scalar(v) for v in row])
    return buf.getvalue()


def write_report(report: ExperimentReport, path: str | None, fmt: str = "csv") -> None:
    """Write ``report`` to ``path`` (``None`` or ``"-"`` for stdout)."""
    text = render(report, fmt)
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write report to {path}: {exc.strerror or exc}") from exc
