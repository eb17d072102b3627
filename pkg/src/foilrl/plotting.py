"""Minimal deterministic SVG emitters for reward curves and scatters.

No plotting dependency: the CSV outputs are the primary artifact and
these are convenience views of them.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

_W, _H = 640, 420
_MARGIN = 50
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


def _scale(values, lo, hi, out_lo, out_hi):
    values = np.asarray(values, dtype=float)
    if hi == lo:
        hi = lo + 1.0
    return out_lo + (values - lo) / (hi - lo) * (out_hi - out_lo)


def _axes(title: str, xlabel: str, ylabel: str, xlo, xhi, ylo, yhi) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W/2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{_MARGIN}" y1="{_H-_MARGIN}" x2="{_W-_MARGIN}" y2="{_H-_MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" y2="{_H-_MARGIN}" stroke="black"/>',
        f'<text x="{_W/2}" y="{_H-12}" text-anchor="middle">{xlabel}</text>',
        f'<text x="14" y="{_H/2}" text-anchor="middle" transform="rotate(-90 14 {_H/2})">{ylabel}</text>',
        f'<text x="{_MARGIN}" y="{_H-_MARGIN+16}" text-anchor="middle">{xlo:.3g}</text>',
        f'<text x="{_W-_MARGIN}" y="{_H-_MARGIN+16}" text-anchor="middle">{xhi:.3g}</text>',
        f'<text x="{_MARGIN-6}" y="{_H-_MARGIN}" text-anchor="end">{ylo:.3g}</text>',
        f'<text x="{_MARGIN-6}" y="{_MARGIN+4}" text-anchor="end">{yhi:.3g}</text>',
    ]


def write_svg_lines(
    path: str | Path,
    series: dict[str, tuple[np.ndarray, np.ndarray]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> None:
    xs_all = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys_all = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    ys_all = ys_all[np.isfinite(ys_all)]
    xlo, xhi = float(xs_all.min()), float(xs_all.max())
    ylo, yhi = float(ys_all.min()), float(ys_all.max())
    parts = _axes(title, xlabel, ylabel, xlo, xhi, ylo, yhi)
    for k, (name, (x, y)) in enumerate(series.items()):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        keep = np.isfinite(y)
        px = _scale(x[keep], xlo, xhi, _MARGIN, _W - _MARGIN)
        py = _scale(y[keep], ylo, yhi, _H - _MARGIN, _MARGIN)
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px, py))
        color = _COLORS[k % len(_COLORS)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{_W-_MARGIN}" y="{_MARGIN + 16*k}" text-anchor="end" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def write_svg_scatter(
    path: str | Path,
    groups: dict[str, tuple[np.ndarray, np.ndarray]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> None:
    xs_all = np.concatenate([np.asarray(x, float) for x, _ in groups.values()])
    ys_all = np.concatenate([np.asarray(y, float) for _, y in groups.values()])
    xlo, xhi = float(xs_all.min()), float(xs_all.max())
    ylo, yhi = float(ys_all.min()), float(ys_all.max())
    parts = _axes(title, xlabel, ylabel, xlo, xhi, ylo, yhi)
    for k, (name, (x, y)) in enumerate(groups.items()):
        px = _scale(np.asarray(x, float), xlo, xhi, _MARGIN, _W - _MARGIN)
        py = _scale(np.asarray(y, float), ylo, yhi, _H - _MARGIN, _MARGIN)
        color = _COLORS[k % len(_COLORS)]
        for a, b in zip(px, py):
            parts.append(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="3" fill="{color}" fill-opacity="0.6"/>')
        parts.append(
            f'<text x="{_W-_MARGIN}" y="{_MARGIN + 16*k}" text-anchor="end" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
