"""Tabular results and their CSV, JSON and SVG renderings.

Rendering is deterministic: values are formatted with a fixed precision, keys
keep insertion order, and nothing time-dependent enters the output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

from . import __version__

PRECISION = 12


@dataclass
class Table:
    """Rows of equal length under named columns, plus a provenance block."""

    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.provenance.setdefault("version", __version__)

    def append(self, row: Sequence) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} values for {len(self.columns)} columns")
        self.rows.append(tuple(row))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def format_value(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if x is None:
        return "nan"
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    if isinstance(x, float) or hasattr(x, "dtype"):
        v = float(x)
        if math.isnan(v):
            return "nan"
        out = format(v, f".{PRECISION}g")
        return "0" if out == "-0" else out
    return str(x)


def _provenance_lines(table: Table) -> list[str]:
    lines = ["# cvdistill"]
    for key, val in table.provenance.items():
        if isinstance(val, (list, tuple)):
            val = " ".join(format_value(v) for v in val)
        else:
            val = format_value(val)
        lines.append(f"# {key}: {val}")
    return lines


def to_csv(table: Table) -> str:
    lines = _provenance_lines(table)
    lines.append(",".join(table.columns))
    for row in table.rows:
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def _json_value(x: Any) -> Any:
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, int):
        return x
    v = float(x)
    if math.isnan(v) or math.isinf(v):
        return None
    return float(format(v, f".{PRECISION}g"))


def to_json(table: Table) -> str:
    prov = {k: (list(v) if isinstance(v, tuple) else v) for k, v in table.provenance.items()}
    doc = {
        "provenance": json.loads(json.dumps(prov, default=_json_value)),
        "columns": table.columns,
        "records": [{c: _json_value(v) for c, v in zip(table.columns, r)} for r in table.rows],
    }
    return json.dumps(doc, indent=2) + "\n"


def render(table: Table, fmt: str = "csv") -> str:
    if fmt == "csv":
        return to_csv(table)
    if fmt == "json":
        return to_json(table)
    raise ValueError(f"unknown format {fmt!r}")


def read_csv(text: str) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Parse :func:`to_csv` output back into ``(provenance, records)``."""
    prov: dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, val = line[1:].strip().partition(":")
            if sep:
                prov[key.strip()] = val.strip()
        elif line:
            body.append(line.split(","))
    if not body:
        return prov, []
    header, *rows = body
    return prov, [dict(zip(header, r)) for r in rows]


# -- SVG ------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#7f7f7f", "#9467bd", "#ff7f0e", "#8c564b")


def to_svg(table: Table, x: str, ys: Sequence[str], title: str = "", width: int = 480, height: int = 320) -> str:
    """Line plot of columns ``ys`` against ``x``; NaN points break the line."""
    xs = [float(v) for v in table.column(x)]
    series = {y: [float(v) if v is not None else math.nan for v in table.column(y)] for y in ys}
    finite = [v for s in series.values() for v in s if math.isfinite(v)]
    if not xs or not finite:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(finite), max(finite)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    m = 40
    sx = lambda v: m + (v - x0) / (x1 - x0) * (width - 2 * m)  # noqa: E731
    sy = lambda v: height - m - (v - y0) / (y1 - y0) * (height - 2 * m)  # noqa: E731
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{m}" y="{m}" width="{width - 2 * m}" height="{height - 2 * m}" fill="none" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{m / 2:.1f}" text-anchor="middle" font-size="12">{title}</text>',
        f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="11">{x}</text>',
        f'<text x="{m}" y="{height - m + 14}" font-size="10">{x0:.4g}</text>',
        f'<text x="{width - m}" y="{height - m + 14}" text-anchor="end" font-size="10">{x1:.4g}</text>',
        f'<text x="{m - 4}" y="{height - m}" text-anchor="end" font-size="10">{y0:.4g}</text>',
        f'<text x="{m - 4}" y="{m + 10}" text-anchor="end" font-size="10">{y1:.4g}</text>',
    ]
    for k, (name, vals) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        segment: list[str] = []
        segments = []
        for xv, yv in zip(xs, vals):
            if math.isfinite(yv):
                segment.append(f"{sx(xv):.2f},{sy(yv):.2f}")
            elif segment:
                segments.append(segment)
                segment = []
        if segment:
            segments.append(segment)
        for seg in segments:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(seg)}"/>')
        out.append(
            f'<text x="{width - m + 4}" y="{m + 14 * (k + 1)}" font-size="10" fill="{color}">{name}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
