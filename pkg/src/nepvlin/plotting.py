"""Minimal self-contained SVG charts for convergence logs and spectra."""

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=20, top=30, bottom=50)
GENUINE = "#1f77b4"
OTHER = "#bbbbbb"


class _Axes:
    def __init__(self, xlim, ylim, logy=False):
        self.logy = logy
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1
        self.w = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.w

    def py(self, y):
        return MARGIN["top"] + (1 - (y - self.y0) / (self.y1 - self.y0)) * self.h


def _ticks(lo, hi, count=5):
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def _frame(ax, title, xlabel, ylabel):
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{ax.w}" height="{ax.h}" fill="none" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" transform="rotate(-90 16 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    for x in _ticks(ax.x0, ax.x1):
        out.append(f'<text x="{ax.px(x):.1f}" y="{MARGIN["top"] + ax.h + 16}" text-anchor="middle">{x:.3g}</text>')
    for y in _ticks(ax.y0, ax.y1):
        label = f"1e{y:.0f}" if ax.logy else f"{y:.3g}"
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{ax.py(y) + 4:.1f}" text-anchor="end">{label}</text>')
    return out


def convergence_svg(log, genuine_tracks=(), title="Ritz value convergence", floor=1e-16):
    """Per-track ``|lam_k - lam_final|`` against ``k`` on a log scale.

    Tracks listed in ``genuine_tracks`` are drawn in colour, all others grey.
    """
    series = {}
    for row in log.rows():
        err = max(row["abs_error_vs_final"], floor)
        series.setdefault(row["track_id"], []).append((row["iter"], math.log10(err)))
    ks = [k for pts in series.values() for k, _ in pts] or [0, 1]
    ys = [y for pts in series.values() for _, y in pts] or [0, 1]
    ax = _Axes((min(ks), max(ks)), (math.floor(min(ys)), math.ceil(max(ys))), logy=True)
    out = _frame(ax, title, "iteration k", "|lambda_k - lambda_ref|")
    genuine_tracks = set(genuine_tracks)
    for tid in sorted(series, key=lambda t: t in genuine_tracks):
        pts = series[tid]
        if len(pts) < 2:
            continue
        color, width = (GENUINE, 2) if tid in genuine_tracks else (OTHER, 1)
        path = " ".join(f"{ax.px(k):.1f},{ax.py(y):.1f}" for k, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="{width}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def spectrum_svg(ritz_lams, genuine_lams, title="Ritz values and eigenvalues"):
    """Real parts against index: Ritz values as grey dots, NEPv eigenvalues as circles."""
    ritz = np.sort(np.real(np.asarray(ritz_lams, dtype=complex)))
    gen = np.sort(np.real(np.asarray(genuine_lams, dtype=complex)))
    vals = np.concatenate([ritz, gen]) if ritz.size + gen.size else np.array([0.0, 1.0])
    ax = _Axes((0, max(len(ritz), len(gen), 2) - 1), (float(vals.min()), float(vals.max())))
    out = _frame(ax, title, "index", "Re lambda")
    for i, lam in enumerate(ritz):
        out.append(f'<circle cx="{ax.px(i):.1f}" cy="{ax.py(lam):.1f}" r="2.5" fill="{OTHER}"/>')
    for i, lam in enumerate(gen):
        out.append(f'<circle cx="{ax.px(i):.1f}" cy="{ax.py(lam):.1f}" r="5" fill="none" stroke="{GENUINE}" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
