"""Deterministic writers: JSON reports, CSV tables with a config-hash header, minimal SVG plots."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np


def to_jsonable(obj):
    """Recursively convert dataclasses, numpy scalars and non-finite floats (to ``None``)."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj):
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def config_hash(config):
    return hashlib.sha256(json.dumps(to_jsonable(config), sort_keys=True).encode()).hexdigest()[:16]


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8", newline="\n")
    return path


def write_csv(path, header, rows, config=None, comments=()):
    """CSV with ``# config_hash=...`` first line; floats via ``repr`` for round-tripping."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config_hash={config_hash(config or {})}\n")
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv(path):
    """Return ``(header, rows)`` skipping comment lines."""
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    return rows[0], rows[1:]


def write_svg(path, series, title="", xlabel="", ylabel="", config=None, width=640, height=400):
    """Line plot of ``series = [(label, xs, ys), ...]`` as a bare SVG (polylines and axes)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pts = [(np.asarray(x, float), np.asarray(y, float)) for _, x, y in series]
    xs = np.concatenate([p[0] for p in pts])
    ys = np.concatenate([p[1] for p in pts])
    ok = np.isfinite(xs) & np.isfinite(ys)
    if not ok.any():
        raise ValueError("nothing to plot")
    x0, x1 = float(xs[ok].min()), float(xs[ok].max())
    y0, y1 = float(ys[ok].min()), float(ys[ok].max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    m = 50

    def sx(v):
        return m + (v - x0) / (x1 - x0) * (width - 2 * m)

    def sy(v):
        return height - m - (v - y0) / (y1 - y0) * (height - 2 * m)

    colours = ["#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d4a017"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<!-- config_hash={config_hash(config or {})} -->",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" stroke="black"/>',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>',
        f'<text x="{width / 2}" y="{m / 2}" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">{_esc(xlabel)}</text>',
        f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})" '
        f'text-anchor="middle">{_esc(ylabel)}</text>',
        f'<text x="{m}" y="{height - m + 16}" font-size="10" text-anchor="middle">{x0:.4g}</text>',
        f'<text x="{width - m}" y="{height - m + 16}" font-size="10" text-anchor="middle">{x1:.4g}</text>',
        f'<text x="{m - 4}" y="{height - m}" font-size="10" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{m - 4}" y="{m + 4}" font-size="10" text-anchor="end">{y1:.4g}</text>',
    ]
    for i, ((label, _, _), (x, y)) in enumerate(zip(series, pts)):
        keep = np.isfinite(x) & np.isfinite(y)
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[keep], y[keep]))
        col = colours[i % len(colours)]
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.2" points="{coords}"/>')
        out.append(
            f'<text x="{width - m}" y="{m + 14 * (i + 1)}" font-size="11" fill="{col}" '
            f'text-anchor="end">{_esc(label)}</text>'
        )
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")
    return path


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
