"""CSV, SVG and JSON writers. Output bytes depend only on the data passed in."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .dynamics import Trajectory


def _num(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))


def trajectory_header(dim: int) -> list[str]:
    return (["t"] + [f"theta1_{i + 1}" for i in range(dim)] + ["theta2", "risk", "w", "r", "grad_norm_sq"]
            + [f"phi_{i + 1}" for i in range(dim)])


def write_trajectory_csv(path, traj: Trajectory):
    dim = traj.thetas.shape[1] - 1 if len(traj) else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(dim))
        for i in range(len(traj)):
            phi = traj.phi[i] if traj.phi is not None else [None] * dim
            w.writerow([_num(traj.times[i])] + [_num(v) for v in traj.thetas[i]]
                       + [_num(traj.risk[i]), _num(traj.w[i]), _num(traj.r[i]), _num(traj.grad_norm_sq[i])]
                       + [_num(v) for v in phi])


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[j]) if r[j] != "" else np.nan for r in body])
            for j, name in enumerate(header)}


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else _num(v)
    return obj


def write_json(path, payload):
    Path(path).write_text(json.dumps(jsonable(payload), indent=2) + "\n")


# -- SVG --------------------------------------------------------------------

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 78, 20, 36, 52
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def _fmt_tick(v, log):
    return f"1e{int(round(v))}" if log else f"{v:.3g}"


def write_plot(stem, series, title="", xlabel="", ylabel="", logy=False, markers=()):
    """Write ``stem.svg`` and its sibling ``stem.csv`` holding exactly the plotted numbers.

    ``series`` is a list of ``(label, xs, ys)``; ``markers`` a list of ``(label, x, y)``.
    Nonpositive values are dropped from log-scale series.
    """
    stem = Path(stem)
    prepared = []
    for label, xs, ys in series:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        keep = np.isfinite(xs) & np.isfinite(ys)
        if logy:
            keep &= ys > 0
        prepared.append((label, xs[keep], ys[keep]))
    marks = [(lab, float(x), float(y)) for lab, x, y in markers]

    with open(stem.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "x", "y"])
        for label, xs, ys in prepared:
            for x, y in zip(xs, ys):
                w.writerow([label, _num(x), _num(y)])
        for label, x, y in marks:
            w.writerow([label, _num(x), _num(y)])

    tr = (lambda v: np.log10(v)) if logy else (lambda v: v)
    allx = np.concatenate([p[1] for p in prepared] + [np.array([m[1] for m in marks])])
    ally = np.concatenate([tr(p[2]) for p in prepared]
                          + [tr(np.array([m[2] for m in marks if not logy or m[2] > 0]))])
    if allx.size == 0:
        allx = np.array([0.0, 1.0])
    if ally.size == 0:
        ally = np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def px(x):
        return _ML + (x - x0) / (x1 - x0) * pw

    def py(y):
        return _MT + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<text x="{_W / 2:.1f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
           f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for tx in _ticks(x0, x1):
        out.append(f'<line x1="{px(tx):.2f}" y1="{_MT + ph}" x2="{px(tx):.2f}" y2="{_MT + ph + 5}" stroke="#444"/>')
        out.append(f'<text x="{px(tx):.2f}" y="{_MT + ph + 18}" text-anchor="middle">{_fmt_tick(tx, False)}</text>')
    yt = (list(range(math.ceil(y0), math.floor(y1) + 1)) if logy and y1 - y0 >= 1 else _ticks(y0, y1))
    for ty in yt:
        out.append(f'<line x1="{_ML - 5}" y1="{py(ty):.2f}" x2="{_ML}" y2="{py(ty):.2f}" stroke="#444"/>')
        out.append(f'<text x="{_ML - 8}" y="{py(ty) + 4:.2f}" text-anchor="end">{_fmt_tick(ty, logy)}</text>')
    out.append(f'<text x="{_ML + pw / 2:.1f}" y="{_H - 12}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{_MT + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {_MT + ph / 2:.1f})">{ylabel}</text>')
    for k, (label, xs, ys) in enumerate(prepared):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, tr(ys)))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{_ML + pw - 8}" y="{_MT + 16 + 15 * k}" text-anchor="end" fill="{color}">{label}</text>')
    for label, x, y in marks:
        if logy and y <= 0:
            continue
        out.append(f'<circle cx="{px(x):.2f}" cy="{py(tr(y)):.2f}" r="4" fill="black"/>')
        out.append(f'<text x="{px(x) + 6:.2f}" y="{py(tr(y)) - 6:.2f}">{label}</text>')
    out.append("</svg>")
    stem.with_suffix(".svg").write_text("\n".join(out) + "\n")
