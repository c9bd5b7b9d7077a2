"""Self-contained log-log SVG charts of error tables.

Output depends only on the table values, so identical tables give
byte-identical files.
"""
from __future__ import annotations

import math
import os
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 480, 360
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50


def _num(v: float) -> str:
    return f"{v:.2f}"


def _decades(lo: float, hi: float):
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def loglog_svg(title: str, xlabel: str, series: dict, guides=(1, 2)) -> str:
    """Render ``series`` (label -> list of (x, y)) on log-log axes.

    Non-positive values are skipped. Guide lines of the given slopes are
    anchored at the first point of the first series.
    """
    clean = {k: [(x, y) for x, y in pts if x > 0 and y > 0 and math.isfinite(y)]
             for k, pts in series.items()}
    allpts = [p for pts in clean.values() for p in pts]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
    ]
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    distinct_x = {x for x, _ in allpts}
    if len(allpts) < 2 or len(distinct_x) < 2:
        out.append(
            f'<text class="insufficient" x="{LEFT + pw // 2}" y="{TOP + ph // 2}" '
            f'text-anchor="middle">insufficient data</text>'
        )
        out.append("</svg>")
        return "\n".join(out) + "\n"

    lx = [math.log10(x) for x, _ in allpts]
    ly = [math.log10(y) for _, y in allpts]
    x0, x1 = min(lx) - 0.1, max(lx) + 0.1
    y0, y1 = min(ly) - 0.3, max(ly) + 0.3

    def X(v):
        return LEFT + (math.log10(v) - x0) / (x1 - x0) * pw

    def Y(v):
        return TOP + (y1 - math.log10(v)) / (y1 - y0) * ph

    out.append('<g class="axes" data-xscale="log" data-yscale="log">')
    for d in _decades(x0, x1):
        if x0 <= d <= x1:
            px = LEFT + (d - x0) / (x1 - x0) * pw
            out.append(f'<line x1="{_num(px)}" y1="{TOP}" x2="{_num(px)}" y2="{TOP + ph}" stroke="#ddd"/>')
            out.append(f'<text x="{_num(px)}" y="{TOP + ph + 15}" text-anchor="middle">1e{d}</text>')
    for d in _decades(y0, y1):
        if y0 <= d <= y1:
            py = TOP + (y1 - d) / (y1 - y0) * ph
            out.append(f'<line x1="{LEFT}" y1="{_num(py)}" x2="{LEFT + pw}" y2="{_num(py)}" stroke="#ddd"/>')
            out.append(f'<text x="{LEFT - 5}" y="{_num(py + 4)}" text-anchor="end">1e{d}</text>')
    out.append(f'<text x="{LEFT + pw // 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)} (log scale)</text>')
    out.append(f'<text x="16" y="{TOP + ph // 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph // 2})">error (log scale)</text>')
    out.append("</g>")

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    anchor = next(iter(clean.values()))
    anchor = anchor[0] if anchor else allpts[0]
    xs = sorted(distinct_x)
    for i, s in enumerate(guides):
        ax, ay = anchor
        a, b = xs[0], xs[-1]
        ya, yb = ay * (a / ax) ** s, ay * (b / ax) ** s
        out.append(
            f'<line class="guide" x1="{_num(X(a))}" y1="{_num(Y(ya))}" x2="{_num(X(b))}" '
            f'y2="{_num(Y(yb))}" stroke="#888" stroke-dasharray="4 3"/>'
        )
        out.append(f'<text class="guide-label" x="{_num(X(b) + 3)}" y="{_num(Y(yb))}" '
                   f'fill="#555">slope {s}</text>')
    for i, (label, pts) in enumerate(clean.items()):
        if not pts:
            continue
        c = colors[i % len(colors)]
        path = " ".join(f"{_num(X(x))},{_num(Y(y))}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        for x, y in pts:
            out.append(f'<circle cx="{_num(X(x))}" cy="{_num(Y(y))}" r="3" fill="{c}"/>')
        ly_ = TOP + 14 + 14 * i
        out.append(f'<text x="{LEFT + 8}" y="{ly_}" fill="{c}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plots(table, directory: str) -> list:
    """Write the eigenvalue and eigenfunction error charts; return their paths."""
    rows = [r for r in table.rows if r["level"] >= 2]
    lam = {"|λ - λ_dir|": [(r["h"], r["err_lambda"]) for r in rows]}
    fun = {
        "‖u - u_dir‖₁": [(r["h"], r["err_h1"]) for r in rows],
        "‖u - u_dir‖₀": [(r["h"], r["err_l2"]) for r in rows],
    }
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, title, series in (
        ("eigenvalue_errors.svg", "Eigenvalue errors", lam),
        ("eigenfunction_errors.svg", "Eigenfunction errors", fun),
    ):
        path = os.path.join(directory, name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(loglog_svg(title, "mesh size h", series))
        paths.append(path)
    return paths
