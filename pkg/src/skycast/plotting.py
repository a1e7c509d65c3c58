"""Plain-text SVG line charts.

No plotting dependency: charts are assembled as strings with fixed
numeric precision, so identical inputs give byte-identical files that
can be diffed in tests.
"""

import math

import numpy as np

from .errors import DomainError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b",
           "#17becf")

_MARGIN_LEFT = 64
_MARGIN_RIGHT = 16
_MARGIN_TOP = 34
_MARGIN_BOTTOM = 46


def _span(lo, hi):
    if not math.isfinite(lo) or not math.isfinite(hi):
        raise DomainError("plot data must contain finite values")
    if hi - lo <= 0:
        return lo - 1.0, hi + 1.0
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _fmt(v):
    return f"{v:.2f}"


def line_plot_svg(series, title="", x_label="", y_label="",
                  width=880, height=440):
    """Render labelled (xs, ys) polylines into an SVG document.

    `series` is a list of (label, xs, ys) or (label, xs, ys, color).
    NaN gaps split a line into separate segments.
    """
    if not series:
        raise DomainError("need at least one series to plot")
    prepared = []
    for idx, row in enumerate(series):
        label, xs, ys = row[0], np.asarray(row[1], float), \
            np.asarray(row[2], float)
        if xs.shape != ys.shape or xs.ndim != 1 or xs.size == 0:
            raise DomainError(f"series {label!r} needs matching 1-D data")
        color = row[3] if len(row) > 3 else PALETTE[idx % len(PALETTE)]
        prepared.append((label, xs, ys, color))

    finite_x = np.concatenate([xs for _, xs, _, _ in prepared])
    finite_y = np.concatenate([ys[np.isfinite(ys)]
                               for _, _, ys, _ in prepared])
    if finite_y.size == 0:
        raise DomainError("no finite values to plot")
    x0, x1 = _span(float(finite_x.min()), float(finite_x.max()))
    y0, y1 = _span(float(finite_y.min()), float(finite_y.max()))

    plot_w = width - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM

    def px(x):
        return _MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w

    def py(y):
        return _MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{_MARGIN_LEFT}" y="{_MARGIN_TOP}" width="{plot_w}" '
           f'height="{plot_h}" fill="none" stroke="#444"/>']
    if title:
        out.append(f'<text x="{width / 2:.0f}" y="20" font-size="15" '
                   f'text-anchor="middle" font-family="sans-serif">'
                   f'{title}</text>')

    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        yv = y0 + frac * (y1 - y0)
        ypix = py(yv)
        out.append(f'<line x1="{_MARGIN_LEFT}" y1="{_fmt(ypix)}" '
                   f'x2="{_MARGIN_LEFT + plot_w}" y2="{_fmt(ypix)}" '
                   f'stroke="#ddd"/>')
        out.append(f'<text x="{_MARGIN_LEFT - 6}" y="{_fmt(ypix + 4)}" '
                   f'font-size="11" text-anchor="end" '
                   f'font-family="sans-serif">{yv:.4g}</text>')
        xv = x0 + frac * (x1 - x0)
        xpix = px(xv)
        out.append(f'<text x="{_fmt(xpix)}" '
                   f'y="{_MARGIN_TOP + plot_h + 16}" font-size="11" '
                   f'text-anchor="middle" font-family="sans-serif">'
                   f'{xv:.4g}</text>')

    for label, xs, ys, color in prepared:
        runs, current = [], []
        for x, y in zip(xs, ys):
            if math.isfinite(y):
                current.append((px(float(x)), py(float(y))))
            elif current:
                runs.append(current)
                current = []
        if current:
            runs.append(current)
        for run in runs:
            pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in run)
            out.append(f'<polyline points="{pts}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5"/>')

    lx = _MARGIN_LEFT + 8
    for idx, (label, _, _, color) in enumerate(prepared):
        ly = _MARGIN_TOP + 14 + 16 * idx
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 28}" y="{ly}" font-size="12" '
                   f'font-family="sans-serif">{label}</text>')

    if x_label:
        out.append(f'<text x="{_MARGIN_LEFT + plot_w / 2:.0f}" '
                   f'y="{height - 10}" font-size="12" '
                   f'text-anchor="middle" font-family="sans-serif">'
                   f'{x_label}</text>')
    if y_label:
        yc = _MARGIN_TOP + plot_h / 2
        out.append(f'<text x="14" y="{yc:.0f}" font-size="12" '
                   f'text-anchor="middle" font-family="sans-serif" '
                   f'transform="rotate(-90 14 {yc:.0f})">{y_label}</text>')

    out.append("</svg>")
    return "\n".join(out) + "\n"


def _hours_of_day(times):
    return [t.hour + t.minute / 60.0 + t.second / 3600.0 for t in times]


def day_curves_svg(table, horizon_min, day, reference=None):
    """Forecast vs target day curve, optionally with the reference run.

    `table` and `reference` are forecast tables; rows are filtered to
    the given horizon and calendar date and plotted over hour of day.
    """
    sub = table.select_horizon(horizon_min).sorted_by_time()
    keep = [i for i, t in enumerate(sub.issue_time) if t.date() == day]
    if not keep:
        raise DomainError(f"no rows at horizon {horizon_min:g} min on "
                          f"{day.isoformat()}")
    times = [sub.issue_time[i] for i in keep]
    xs = _hours_of_day(times)
    series = [("target", xs, sub.y_true[keep]),
              ("forecast", xs, sub.y_pred[keep])]
    if reference is not None:
        ref = reference.select_horizon(horizon_min).sorted_by_time()
        rkeep = [i for i, t in enumerate(ref.issue_time)
                 if t.date() == day]
        if rkeep:
            series.append(("smart persistence",
                           _hours_of_day([ref.issue_time[i]
                                          for i in rkeep]),
                           ref.y_pred[rkeep]))
    title = f"{day.isoformat()} at {horizon_min:g} min ahead"
    return line_plot_svg(series, title=title, x_label="hour of day (UTC)",
                         y_label="GHI (W/m2)")
