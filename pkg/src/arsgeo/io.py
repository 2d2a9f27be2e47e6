"""CSV, JSON and SVG writers with fixed, byte-reproducible formatting."""

from __future__ import annotations

import csv
import io as _io
import math
import sys
from pathlib import Path

import numpy as np

from .errors import OutputError

__all__ = ["fmt", "csv_text", "json_text", "svg_text", "write_text", "write_csv", "write_json", "write_svg"]


def fmt(v) -> str:
    """17 significant digits for floats; empty cell for None."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _json(v, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f'{pad}{_json(str(k), indent, level + 1)}: {_json(x, indent, level + 1)}' for k, x in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        v = list(v)
        if not v:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in v):
            return "[" + ", ".join(_json(x, indent, level + 1) for x in v) + "]"
        return "[\n" + ",\n".join(pad + _json(x, indent, level + 1) for x in v) + "\n" + end + "]"
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        # non-finite values are not JSON; they are written as null
        return format(float(v), ".17g") if math.isfinite(v) else "null"
    s = str(v)
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def json_text(obj, indent: int = 2) -> str:
    return _json(obj, indent, 0) + "\n"


def svg_text(polylines, points=(), title: str = "", size: int = 600, bbox=None) -> str:
    """A static figure: each polyline is ``(xy array, closed, colour)``."""
    allpts = [np.asarray(p, dtype=float).reshape(-1, 2) for p, _, _ in polylines]
    allpts += [np.asarray(p, dtype=float).reshape(-1, 2) for p, _ in points]
    allpts = [p[np.all(np.isfinite(p), axis=1)] for p in allpts]
    allpts = [p for p in allpts if len(p)]
    if bbox is None:
        if allpts:
            cat = np.concatenate(allpts)
            x0, y0 = cat.min(axis=0)
            x1, y1 = cat.max(axis=0)
        else:
            x0 = y0 = -1.0
            x1 = y1 = 1.0
    else:
        x0, x1, y0, y1 = bbox
    w = max(x1 - x0, 1e-12)
    h = max(y1 - y0, 1e-12)
    m = 0.05 * max(w, h)
    x0, x1, y0, y1 = x0 - m, x1 + m, y0 - m, y1 + m
    scale = size / max(x1 - x0, y1 - y0)
    W, H = (x1 - x0) * scale, (y1 - y0) * scale

    def tr(p):
        return (p[:, 0] - x0) * scale, (y1 - p[:, 1]) * scale

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.1f}" height="{H:.1f}" viewBox="0 0 {W:.3f} {H:.3f}">',
        f'<rect x="0" y="0" width="{W:.3f}" height="{H:.3f}" fill="white"/>',
    ]
    if title:
        out.append(f'<title>{title}</title>')
    for pts, closed, colour in polylines:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        # split at non-finite samples
        good = np.all(np.isfinite(pts), axis=1)
        runs, cur = [], []
        for p, g in zip(pts, good):
            if g:
                cur.append(p)
            elif cur:
                runs.append(np.array(cur))
                cur = []
        if cur:
            runs.append(np.array(cur))
        for run in runs:
            X, Y = tr(run)
            coords = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(X, Y))
            tag = "polygon" if closed and len(runs) == 1 else "polyline"
            out.append(f'<{tag} points="{coords}" fill="none" stroke="{colour}" stroke-width="1"/>')
    for pts, colour in points:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        pts = pts[np.all(np.isfinite(pts), axis=1)]
        X, Y = tr(pts)
        for a, b in zip(X, Y):
            out.append(f'<circle cx="{a:.3f}" cy="{b:.3f}" r="1.5" fill="{colour}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_text(path, text: str):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    try:
        with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def write_csv(path, header, rows):
    write_text(path, csv_text(header, rows))


def write_json(path, obj):
    write_text(path, json_text(obj))


def write_svg(path, polylines, points=(), title="", bbox=None):
    write_text(path, svg_text(polylines, points, title, bbox=bbox))
