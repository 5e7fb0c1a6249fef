"""Deterministic SVG output: AU arrow overlays and VE curve plots."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .geometry import N_KEYPOINTS
from .kpm import N_ROWS

NEUTRAL_COLOR = "#d62728"
MOVED_COLOR = "#2ca02c"
ARROW_COLOR = "#1f77b4"
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _n(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _esc(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


def export_au_svg(au_vector, neutral, scale: float = 1.0, *, threshold: float = 1e-9,
                  size: int = 400, margin: float = 20.0, title: Optional[str] = None,
                  validity=None) -> str:
    """Neutral keypoints, displaced keypoints ``neutral + scale * au`` and an
    arrow for every keypoint that moves more than ``threshold``.

    ``neutral`` is a frame (anything with ``coords`` and ``validity``) or a
    68 x 2 array. Output depends only on the inputs.
    """
    au = np.asarray(au_vector, dtype=float)
    if au.shape != (N_ROWS,):
        raise ValueError(f"AU vector must have length {N_ROWS}")
    if hasattr(neutral, "coords"):
        base = np.asarray(neutral.coords, dtype=float)
        valid = np.asarray(neutral.validity, dtype=bool) if validity is None else np.asarray(validity, bool)
    else:
        base = np.asarray(neutral, dtype=float).reshape(N_KEYPOINTS, 2)
        valid = np.ones(N_KEYPOINTS, bool) if validity is None else np.asarray(validity, bool)
    disp = scale * au.reshape(N_KEYPOINTS, 2)
    moved = base + disp

    pts = np.vstack([base[valid], moved[valid]]) if valid.any() else np.zeros((1, 2))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = max(float((hi - lo).max()), 1e-9)
    s = (size - 2 * margin) / span

    def xy(p):
        return margin + (p[0] - lo[0]) * s, margin + (p[1] - lo[1]) * s

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           '<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" '
           f'orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="{ARROW_COLOR}"/></marker></defs>',
           f'<rect width="{size}" height="{size}" fill="white"/>']
    if title:
        out.append(f'<title>{_esc(title)}</title>')
    mag = np.linalg.norm(disp, axis=1)
    for i in range(N_KEYPOINTS):
        if valid[i] and mag[i] > threshold:
            x1, y1 = xy(base[i])
            x2, y2 = xy(moved[i])
            out.append(f'<line class="arrow" x1="{_n(x1)}" y1="{_n(y1)}" x2="{_n(x2)}" y2="{_n(y2)}" '
                       f'stroke="{ARROW_COLOR}" stroke-width="1.2" marker-end="url(#head)"/>')
    for i in range(N_KEYPOINTS):
        if valid[i]:
            x, y = xy(base[i])
            out.append(f'<circle class="neutral" cx="{_n(x)}" cy="{_n(y)}" r="2.5" fill="{NEUTRAL_COLOR}"/>')
    for i in range(N_KEYPOINTS):
        if valid[i]:
            x, y = xy(moved[i])
            out.append(f'<circle class="moved" cx="{_n(x)}" cy="{_n(y)}" r="2" fill="{MOVED_COLOR}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def auto_scale(U: np.ndarray, neutral_coords: np.ndarray, fraction: float = 0.15) -> float:
    """Scale making the largest AU displacement ``fraction`` of the face width."""
    width = float(np.ptp(np.asarray(neutral_coords)[:, 0])) or 1.0
    peak = float(np.abs(np.asarray(U)).max(initial=0.0))
    return fraction * width / peak if peak > 0 else 1.0


def curves_svg(series: Sequence, *, xlabel: str, ylabel: str = "VE (%)", log_x: bool = False,
               width: int = 560, height: int = 360, title: str = "") -> str:
    """Line plot of ``(label, x, y)`` series. VE below 0 is clamped for display."""
    ml, mr, mt, mb = 60.0, 140.0, 30.0, 45.0
    xs_all, ys_all = [], []
    prepared = []
    for label, x, y in series:
        x = np.asarray(x, dtype=float)
        y = np.clip(np.asarray(y, dtype=float), 0.0, 100.0)
        if log_x:
            keep = x > 0
            x, y = np.log10(x[keep]), y[keep]
        prepared.append((label, x, y))
        xs_all.append(x)
        ys_all.append(y)
    xs = np.concatenate(xs_all) if xs_all else np.zeros(1)
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    y0, y1 = 0.0, 100.0
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + (1 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{_n(width / 2)}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>',
           f'<line x1="{_n(ml)}" y1="{_n(mt + ph)}" x2="{_n(ml + pw)}" y2="{_n(mt + ph)}" stroke="black"/>',
           f'<line x1="{_n(ml)}" y1="{_n(mt)}" x2="{_n(ml)}" y2="{_n(mt + ph)}" stroke="black"/>']
    for t in range(0, 101, 20):
        out.append(f'<text x="{_n(ml - 6)}" y="{_n(py(t) + 4)}" text-anchor="end" font-size="10">{t}</text>')
    for t in np.linspace(x0, x1, 6):
        lab = _n(10 ** t) if log_x else _n(t)
        out.append(f'<text x="{_n(px(t))}" y="{_n(mt + ph + 15)}" text-anchor="middle" font-size="10">{lab}</text>')
    out.append(f'<text x="{_n(ml + pw / 2)}" y="{_n(height - 8)}" text-anchor="middle" font-size="11">'
               f'{_esc(xlabel + (" (log scale)" if log_x else ""))}</text>')
    out.append(f'<text x="14" y="{_n(mt + ph / 2)}" font-size="11" '
               f'transform="rotate(-90 14 {_n(mt + ph / 2)})" text-anchor="middle">{_esc(ylabel)}</text>')
    for n, (label, x, y) in enumerate(prepared):
        color = PALETTE[n % len(PALETTE)]
        if x.size:
            d = " ".join(f"{_n(px(a))},{_n(py(b))}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{d}"/>')
        ly = mt + 14 * n + 8
        out.append(f'<line x1="{_n(ml + pw + 10)}" y1="{_n(ly)}" x2="{_n(ml + pw + 28)}" y2="{_n(ly)}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_n(ml + pw + 32)}" y="{_n(ly + 4)}" font-size="10">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
