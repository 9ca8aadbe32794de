"""CSV ingestion, atomic CSV/JSON output and a small SVG writer."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .pointcloud import PointCloud


def _resolve_column(header: list[str], col) -> int:
    if isinstance(col, int) or (isinstance(col, str) and col.isdigit()):
        i = int(col)
        if not 0 <= i < len(header):
            raise InvalidInputError(f"column index {i} out of range (file has {len(header)} columns)")
        return i
    if col not in header:
        raise InvalidInputError(f"missing column {col!r}; file has {', '.join(header)}")
    return header.index(col)


def _number(cell: str, row: int, name: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise InvalidInputError(f"non-numeric value {cell!r} in column {name!r} at row {row}") from None
    if not math.isfinite(v):
        raise InvalidInputError(f"non-finite value {cell!r} in column {name!r} at row {row}")
    return v


def read_point_cloud(path, columns=None, filters=()) -> PointCloud:
    """Load selected columns of a headed CSV, keeping rows inside every filter.

    ``filters`` is a sequence of (column, lo, hi) closed intervals.  Rows are
    kept in file order; ``meta["dropped"]`` counts rows removed by each
    filter (a row is charged to the first filter it fails).  Row numbers in
    errors count the header as row 1.
    """
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidInputError(f"{path} is empty") from None
        if columns is None or len(columns) == 0:
            sel = list(range(len(header)))
        else:
            sel = [_resolve_column(header, c) for c in columns]
        flt = [(_resolve_column(header, c), float(lo), float(hi), str(c)) for c, lo, hi in filters]
        for _, lo, hi, name in flt:
            if lo > hi:
                raise InvalidInputError(f"filter on {name!r} has lo > hi")
        dropped = {f"{name}:{lo:g}:{hi:g}": 0 for _, lo, hi, name in flt}
        keys = list(dropped)
        rows = []
        total = 0
        for rownum, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise InvalidInputError(f"row {rownum} has {len(rec)} fields, expected {len(header)}")
            total += 1
            ok = True
            for key, (i, lo, hi, name) in zip(keys, flt):
                v = _number(rec[i], rownum, header[i])
                if not lo <= v <= hi:
                    dropped[key] += 1
                    ok = False
                    break
            if ok:
                rows.append([_number(rec[i], rownum, header[i]) for i in sel])
    if not rows:
        raise InvalidInputError(f"no rows left after filtering {path} ({total} read)")
    return PointCloud(np.array(rows), tuple(header[i] for i in sel),
                      meta={"rows_read": total, "rows_kept": len(rows), "dropped": dropped})


def format_float(v) -> str:
    """Shortest round-trip decimal, independent of locale."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: list[str], columns: list) -> None:
    """Write equal-length columns; ints stay ints, floats use repr."""
    cols = [np.asarray(c) for c in columns]
    n = cols[0].shape[0] if cols else 0
    if any(c.shape[0] != n for c in cols):
        raise InvalidInputError("CSV columns have different lengths")
    lines = [",".join(header)]
    for i in range(n):
        cells = []
        for c in cols:
            v = c[i]
            cells.append(str(int(v)) if np.issubdtype(c.dtype, np.integer) else format_float(v))
        lines.append(",".join(cells))
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path, obj) -> None:
    _atomic_write(Path(path), json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


# -- SVG ---------------------------------------------------------------------

# Low-to-high colour ramp (dark blue, teal, yellow) used for per-point values.
COLOR_SCALE = ((0.0, (48, 18, 110)), (0.5, (32, 146, 140)), (1.0, (250, 230, 35)))


def value_color(t: float) -> str:
    t = min(max(float(t), 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(COLOR_SCALE, COLOR_SCALE[1:]):
        if t <= t1:
            f = (t - t0) / (t1 - t0)
            rgb = [round(a + f * (b - a)) for a, b in zip(c0, c1)]
            return "#%02x%02x%02x" % tuple(rgb)
    return "#%02x%02x%02x" % COLOR_SCALE[-1][1]


def svg_scatter(path, data=None, ridge=None, values=None, radii=None, curves=(), size: int = 600,
                title: str = "") -> None:
    """Data (grey), ridge points coloured by ``values``, optional balls and polylines."""
    layers = [np.asarray(a, dtype=float)[:, :2] for a in (data, ridge) if a is not None and len(a)]
    if not layers:
        raise InvalidInputError("nothing to plot")
    allp = np.vstack(layers)
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    pad = 0.05 * span
    scale = size / (span + 2 * pad)

    def tx(p):
        return (p[0] - lo[0] + pad) * scale, size - (p[1] - lo[1] + pad) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>']
    if title:
        out.append(f'<title>{title}</title>')
    if data is not None:
        for p in np.asarray(data, dtype=float)[:, :2]:
            x, y = tx(p)
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="1" fill="#bbbbbb"/>')
    if ridge is not None and len(ridge):
        R = np.asarray(ridge, dtype=float)[:, :2]
        if values is not None and len(values):
            v = np.asarray(values, dtype=float)
            vmin, vmax = float(v.min()), float(v.max())
            t = (v - vmin) / (vmax - vmin) if vmax > vmin else np.zeros_like(v)
        else:
            t = np.zeros(R.shape[0])
        if radii is not None:
            for p, r, ti in zip(R, radii, t):
                x, y = tx(p)
                out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r * scale:.2f}" fill="{value_color(ti)}" '
                           f'fill-opacity="0.15" stroke="none"/>')
        for c in curves:
            pts = " ".join("%.2f,%.2f" % tx(p) for p in c.vertices)
            if c.closed:
                pts += " " + "%.2f,%.2f" % tx(c.vertices[0])
            out.append(f'<polyline points="{pts}" fill="none" stroke="#333333" stroke-width="1"/>')
        for p, ti in zip(R, t):
            x, y = tx(p)
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{value_color(ti)}"/>')
    out.append("</svg>")
    _atomic_write(Path(path), "\n".join(out) + "\n")
