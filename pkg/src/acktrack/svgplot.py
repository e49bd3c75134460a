"""Self-contained deterministic SVG line plots.

Byte-identical output for identical inputs: fixed styling, fixed palette,
no timestamps or generated ids.
"""

import io
import math

from .errors import DomainError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

WIDTH, HEIGHT = 720, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 62, 16, 34, 46


def _nice_ticks(lo: float, hi: float, n: int = 6):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * span else t)
        t += step
    return ticks


def _fmt(v: float) -> str:
    return format(v, ".6g")


def line_plot(series, title: str = "", xlabel: str = "", ylabel: str = "",
              equal_axes: bool = False) -> str:
    """Render labelled (xs, ys) series to an SVG string.

    ``series`` is an iterable of (label, xs, ys).
    """
    series = [(str(label), list(map(float, xs)), list(map(float, ys)))
              for label, xs, ys in series]
    if not series or any(len(xs) == 0 or len(xs) != len(ys)
                         for _, xs, ys in series):
        raise DomainError("plot needs non-empty, equal-length series")

    x_lo = min(min(xs) for _, xs, _ in series)
    x_hi = max(max(xs) for _, xs, _ in series)
    y_lo = min(min(ys) for _, _, ys in series)
    y_hi = max(max(ys) for _, _, ys in series)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad
    if equal_axes:
        x_span = x_hi - x_lo
        y_span = y_hi - y_lo
        plot_w = WIDTH - MARGIN_L - MARGIN_R
        plot_h = HEIGHT - MARGIN_T - MARGIN_B
        per_px = max(x_span / plot_w, y_span / plot_h)
        x_mid, y_mid = 0.5 * (x_lo + x_hi), 0.5 * (y_lo + y_hi)
        x_lo, x_hi = x_mid - per_px * plot_w / 2, x_mid + per_px * plot_w / 2
        y_lo, y_hi = y_mid - per_px * plot_h / 2, y_mid + per_px * plot_h / 2

    def sx(x):
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_L - MARGIN_R)

    def sy(y):
        return HEIGHT - MARGIN_B - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)

    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
              f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">\n')
    out.write(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n')
    out.write(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" '
              f'width="{WIDTH - MARGIN_L - MARGIN_R}" '
              f'height="{HEIGHT - MARGIN_T - MARGIN_B}" fill="none" '
              f'stroke="#444444" stroke-width="1"/>\n')
    for t in _nice_ticks(x_lo, x_hi):
        px = sx(t)
        out.write(f'<line x1="{px:.2f}" y1="{MARGIN_T}" x2="{px:.2f}" '
                  f'y2="{HEIGHT - MARGIN_B}" stroke="#dddddd" stroke-width="0.7"/>\n')
        out.write(f'<text x="{px:.2f}" y="{HEIGHT - MARGIN_B + 16}" '
                  f'font-family="monospace" font-size="11" fill="#222222" '
                  f'text-anchor="middle">{_fmt(t)}</text>\n')
    for t in _nice_ticks(y_lo, y_hi):
        py = sy(t)
        out.write(f'<line x1="{MARGIN_L}" y1="{py:.2f}" x2="{WIDTH - MARGIN_R}" '
                  f'y2="{py:.2f}" stroke="#dddddd" stroke-width="0.7"/>\n')
        out.write(f'<text x="{MARGIN_L - 6}" y="{py + 4:.2f}" '
                  f'font-family="monospace" font-size="11" fill="#222222" '
                  f'text-anchor="end">{_fmt(t)}</text>\n')
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        out.write(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                  f'stroke-width="1.4"/>\n')
        ly = MARGIN_T + 16 + 15 * i
        out.write(f'<line x1="{WIDTH - MARGIN_R - 150}" y1="{ly - 4}" '
                  f'x2="{WIDTH - MARGIN_R - 126}" y2="{ly - 4}" '
                  f'stroke="{color}" stroke-width="2"/>\n')
        out.write(f'<text x="{WIDTH - MARGIN_R - 120}" y="{ly}" '
                  f'font-family="monospace" font-size="11" '
                  f'fill="#222222">{label}</text>\n')
    if title:
        out.write(f'<text x="{WIDTH / 2:.0f}" y="20" font-family="monospace" '
                  f'font-size="13" fill="#000000" text-anchor="middle">{title}</text>\n')
    if xlabel:
        out.write(f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 10}" '
                  f'font-family="monospace" font-size="12" fill="#000000" '
                  f'text-anchor="middle">{xlabel}</text>\n')
    if ylabel:
        out.write(f'<text x="16" y="{HEIGHT / 2:.0f}" font-family="monospace" '
                  f'font-size="12" fill="#000000" text-anchor="middle" '
                  f'transform="rotate(-90 16 {HEIGHT / 2:.0f})">{ylabel}</text>\n')
    out.write("</svg>\n")
    return out.getvalue()


def emit_plot(records, kind: str = "error_vs_distance") -> str:
    """Figure-style plots from run records.

    Kinds: error_vs_distance (signed e_cg vs s), abs_error_vs_distance,
    velocity_vs_time, trajectory.
    """
    if not records:
        raise DomainError("need at least one record")
    if kind == "error_vs_distance":
        series = [(r.meta.get("name", f"run{i}"), r.s, r.e_cg)
                  for i, r in enumerate(records)]
        return line_plot(series, "cross-track error vs distance",
                         "distance travelled [m]", "e_cg [m]")
    if kind == "abs_error_vs_distance":
        series = [(r.meta.get("name", f"run{i}"), r.s, [abs(v) for v in r.e_cg])
                  for i, r in enumerate(records)]
        return line_plot(series, "|cross-track error| vs distance",
                         "distance travelled [m]", "|e_cg| [m]")
    if kind == "velocity_vs_time":
        series = [(r.meta.get("name", f"run{i}"), r.t, r.v_x)
                  for i, r in enumerate(records)]
        return line_plot(series, "velocity vs time", "t [s]", "v_x [m/s]")
    if kind == "trajectory":
        series = [(r.meta.get("name", f"run{i}"), r.x, r.y)
                  for i, r in enumerate(records)]
        return line_plot(series, "trajectory", "x [m]", "y [m]", equal_axes=True)
    raise DomainError(f"unknown plot kind {kind!r}")
