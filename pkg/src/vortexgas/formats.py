"""File formats: key:value text, CSV, raw field pairs and SVG tracks.

Floats are written with ``repr`` so every CSV value round-trips exactly.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .fields import Grid2D, ScalarField2D


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return "none"
    if isinstance(x, (list, tuple, np.ndarray)):
        return ", ".join(fmt(v) for v in x)
    return str(x)


def write_keyvalue(path, items: dict):
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        for key, value in items.items():
            fh.write(f"{key}: {fmt(value)}\n")
    return path


def parse_keyvalue(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ValidationError(f"line {lineno}: expected 'key: value', got {raw!r}")
        key, value = line.split(":", 1)
        out[key.strip()] = value.strip()
    return out


def read_keyvalue(path) -> dict:
    return parse_keyvalue(Path(path).read_text())


def write_csv(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def read_columns(path, *names):
    header, rows = read_csv(path)
    idx = [header.index(n) for n in names]
    return [np.array([float(r[i]) for r in rows]) for i in idx]


# -- gridded fields ------------------------------------------------------------

def write_field(stem, field: ScalarField2D):
    """Write ``<stem>.meta`` (key:value) and ``<stem>.bin`` (little-endian float64, row-major)."""
    stem = Path(stem)
    g = field.grid
    data_path = stem.with_suffix(".bin")
    np.ascontiguousarray(g.values, dtype="<f8").tofile(data_path)
    meta = {
        "nx": g.nx, "ny": g.ny, "dx": g.dx, "dy": g.dy,
        "x0": g.origin[0], "y0": g.origin[1],
        "quantity": field.quantity, "units": field.units or "none",
        "data": data_path.name,
    }
    return write_keyvalue(stem.with_suffix(".meta"), meta), data_path


def read_field(meta_path) -> ScalarField2D:
    meta_path = Path(meta_path)
    meta = read_keyvalue(meta_path)
    try:
        nx, ny = int(meta["nx"]), int(meta["ny"])
        dx, dy = float(meta["dx"]), float(meta["dy"])
        origin = (float(meta["x0"]), float(meta["y0"]))
    except KeyError as exc:
        raise ValidationError(f"field manifest {meta_path} lacks key {exc.args[0]!r}") from exc
    data_path = meta_path.with_name(meta.get("data", meta_path.with_suffix(".bin").name))
    values = np.fromfile(data_path, dtype="<f8")
    if values.size != nx * ny:
        raise ValidationError(f"{data_path} holds {values.size} values, manifest says {nx * ny}")
    units = meta.get("units", "")
    return ScalarField2D(Grid2D(nx, ny, dx, dy, origin, values), meta.get("quantity", "generic"),
                         "" if units == "none" else units)


def field_to_csv(path, field: ScalarField2D):
    g = field.grid
    X, Y = g.meshgrid()
    return write_csv(path, ["x", "y", "value"],
                     zip(X.ravel(), Y.ravel(), g.values.ravel()))


# -- trajectories ------------------------------------------------------------

def write_trajectory(path, traj):
    rows = ((t, i, p[0], p[1])
            for t, frame in zip(traj.times, traj.positions)
            for i, p in enumerate(frame))
    return write_csv(path, ["t", "vortex_id", "x", "y"], rows)


def write_diagnostics(path, traj):
    rows = zip(traj.times, traj.H, traj.gamma_total, traj.Mx, traj.My, traj.I)
    return write_csv(path, ["t", "H", "Gamma", "Mx", "My", "I"], rows)


def read_trajectory(path):
    header, rows = read_csv(path)
    data = np.array([[float(v) for v in r] for r in rows])
    times = np.unique(data[:, 0])
    n = int(data[:, 1].max()) + 1
    return times, data[:, 2:4].reshape(len(times), n, 2)


def tracks_svg(traj, style=None) -> str:
    """SVG with one polyline per vortex and a viewBox fitted with a 5 % margin."""
    if traj is None or len(traj.times) == 0 or traj.positions.size == 0:
        raise ValidationError("cannot draw an empty trajectory")
    style = {"stroke_width": 0.004, "colors": ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")} | (style or {})
    pos = traj.positions
    xs, ys = pos[..., 0], -pos[..., 1]
    x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
    span = max(x1 - x0, y1 - y0)
    if span == 0:
        span = 1.0
    m = 0.05 * span
    w = max(x1 - x0, 0.0) + 2 * m
    h = max(y1 - y0, 0.0) + 2 * m
    sw = style["stroke_width"] * span
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0 - m:.6g} {y0 - m:.6g} {w:.6g} {h:.6g}">',
    ]
    colors = style["colors"]
    for i in range(pos.shape[1]):
        pts = " ".join(f"{x:.6g},{y:.6g}" for x, y in zip(xs[:, i], ys[:, i]))
        lines.append(f'<polyline id="vortex-{i}" fill="none" stroke="{colors[i % len(colors)]}" '
                     f'stroke-width="{sw:.6g}" points="{pts}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def export_tracks_svg(traj, path, style=None):
    path = Path(path)
    path.write_text(tracks_svg(traj, style), newline="\n")
    return path


def parse_svg_polylines(text: str):
    """Point arrays of every polyline in an SVG written by :func:`tracks_svg`."""
    import re

    out = []
    for pts in re.findall(r'points="([^"]*)"', text):
        arr = np.array([[float(a) for a in p.split(",")] for p in pts.split()])
        out.append(arr)
    return out
