"""Byte-stable file output: RFC 4180 CSV, hand-built SVG line charts and
atomic writes."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

import numpy as np


def format_cell(value) -> str:
    """Render one CSV cell; floats get 12 significant digits, missing is empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if v == 0.0:
            return "0"  # folds -0.0 too
        return f"{v:.12g}"
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} cells, header has {len(header)}")
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def atomic_write(path: str | os.PathLike, data: str | bytes) -> Path:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return atomic_write(path, csv_text(header, rows))


PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#7f7f7f")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def line_panel(x0: float, y0: float, width: float, height: float, title: str, x_label: str,
               series: Sequence[tuple[str, Sequence[float], Sequence[float | None]]]) -> list[str]:
    """SVG elements for one chart. ``None`` y values break the line."""
    left, right, top, bottom = 50.0, 110.0, 28.0, 36.0
    pw, ph = width - left - right, height - top - bottom
    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy if y is not None and math.isfinite(y)]
    xmin, xmax = (min(xs), max(xs)) if xs else (0.0, 1.0)
    ymin, ymax = (min(ys), max(ys)) if ys else (0.0, 1.0)
    ymin = min(ymin, 0.0)
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0

    def px(x):
        return x0 + left + (x - xmin) / (xmax - xmin) * pw

    def py(y):
        return y0 + top + (1.0 - (y - ymin) / (ymax - ymin)) * ph

    out = [
        f'<text x="{_fmt(x0 + left + pw / 2)}" y="{_fmt(y0 + 18)}" text-anchor="middle" '
        f'font-size="13">{escape(title)}</text>',
        f'<rect x="{_fmt(x0 + left)}" y="{_fmt(y0 + top)}" width="{_fmt(pw)}" height="{_fmt(ph)}" '
        'fill="none" stroke="#000" stroke-width="1"/>',
    ]
    for t in _nice_ticks(xmin, xmax):
        out.append(f'<line x1="{_fmt(px(t))}" y1="{_fmt(y0 + top + ph)}" x2="{_fmt(px(t))}" '
                   f'y2="{_fmt(y0 + top + ph + 4)}" stroke="#000"/>')
        out.append(f'<text x="{_fmt(px(t))}" y="{_fmt(y0 + top + ph + 16)}" text-anchor="middle" '
                   f'font-size="10">{t:g}</text>')
    for t in _nice_ticks(ymin, ymax):
        out.append(f'<line x1="{_fmt(x0 + left - 4)}" y1="{_fmt(py(t))}" x2="{_fmt(x0 + left)}" '
                   f'y2="{_fmt(py(t))}" stroke="#000"/>')
        out.append(f'<text x="{_fmt(x0 + left - 6)}" y="{_fmt(py(t) + 3)}" text-anchor="end" '
                   f'font-size="10">{t:g}</text>')
    out.append(f'<text x="{_fmt(x0 + left + pw / 2)}" y="{_fmt(y0 + height - 4)}" '
               f'text-anchor="middle" font-size="11">{escape(x_label)}</text>')
    for i, (label, sx, sy) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        parts, pen_down = [], False
        for x, y in zip(sx, sy):
            if y is None or not math.isfinite(y):
                pen_down = False
                continue
            parts.append(f'{"L" if pen_down else "M"}{_fmt(px(x))},{_fmt(py(y))}')
            pen_down = True
        if parts:
            out.append(f'<path d="{" ".join(parts)}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = y0 + top + 10 + 16 * i
        lx = x0 + left + pw + 10
        out.append(f'<line x1="{_fmt(lx)}" y1="{_fmt(ly)}" x2="{_fmt(lx + 18)}" y2="{_fmt(ly)}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_fmt(lx + 22)}" y="{_fmt(ly + 4)}" font-size="11">{escape(label)}</text>')
    return out


def svg_document(width: float, height: float, elements: Sequence[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
            f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">')
    body = [head, f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="#fff"/>']
    body.extend(elements)
    body.append("</svg>")
    return "\n".join(body) + "\n"
