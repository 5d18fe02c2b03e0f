"""Plot data export and a dependency-free SVG rendering.

The CSV carries everything needed to redraw the figure elsewhere: the index
level, its moving average, each changepoint with its sign, and the flow regime
of every day.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import DailySeries, date_to_quarter
from .episodes import Episode, FlowLabel
from .io import fmt, write_csv
from .join import regime_of
from .trend import Sign, SignedChangepoint

PLOT_FIELDS = ["date", "level", "moving_average", "changepoint", "regime"]
_FILL = {FlowLabel.SURGE: "#cfe8cf", FlowLabel.OUTFLOW: "#f3d0d0"}


def plot_rows(series: DailySeries, ma: np.ndarray, cps: Sequence[SignedChangepoint],
              episodes: Sequence[Episode]) -> list[dict]:
    marks = {cp.position: cp.sign.value for cp in cps}
    rows = []
    for i, (d, y) in enumerate(zip(series.dates, series.values), start=1):
        rows.append({"date": d.isoformat(), "level": fmt(y), "moving_average": fmt(ma[i - 1]),
                     "changepoint": marks.get(i, ""),
                     "regime": regime_of(date_to_quarter(d), episodes).value})
    return rows


def write_plot_csv(path, rows: list[dict]) -> None:
    write_csv(path, PLOT_FIELDS, rows)


def render_svg(title: str, rows: list[dict], width: int = 900, height: int = 320) -> str:
    """Level and MA as polylines, regimes as shaded bands, changepoints as ticks."""
    n = len(rows)
    y = np.array([float(r["level"]) for r in rows])
    ma = np.array([float(r["moving_average"]) for r in rows])
    lo, hi = float(min(y.min(), ma.min())), float(max(y.max(), ma.max()))
    span = hi - lo or 1.0
    pad = 30

    def px(i):
        return pad + (width - 2 * pad) * (i / max(n - 1, 1))

    def py(v):
        return height - pad - (height - 2 * pad) * ((v - lo) / span)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<text x="{pad}" y="18" font-family="sans-serif" font-size="13">{_escape(title)}</text>']
    # regime bands, one rectangle per run of equal regime
    i = 0
    while i < n:
        j = i
        while j + 1 < n and rows[j + 1]["regime"] == rows[i]["regime"]:
            j += 1
        fill = _FILL.get(FlowLabel(rows[i]["regime"]))
        if fill:
            out.append(f'<rect x="{px(i):.2f}" y="{pad}" width="{max(px(j) - px(i), 1):.2f}" '
                       f'height="{height - 2 * pad}" fill="{fill}"/>')
        i = j + 1
    for vals, colour in ((y, "#555555"), (ma, "#1f4e9e")):
        pts = " ".join(f"{px(k):.2f},{py(v):.2f}" for k, v in enumerate(vals))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1" points="{pts}"/>')
    for k, r in enumerate(rows):
        if r["changepoint"]:
            colour = "#2a7d2a" if r["changepoint"] == Sign.POSITIVE.value else "#b22222"
            out.append(f'<line x1="{px(k):.2f}" x2="{px(k):.2f}" y1="{pad}" y2="{height - pad}" '
                       f'stroke="{colour}" stroke-dasharray="3,3"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
