"""Deterministic SVG/CSV rendering for analysis and validation outputs.

All documents are assembled by string formatting so identical inputs
produce byte-identical outputs; no plotting library is involved.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

from .analysis import Histogram, PairStats, UnknownNode

CELL = 64
RED = "#c0392b"
RAMP_LOW = (247, 251, 255)   # near white at 0 ms
RAMP_HIGH = (8, 48, 107)     # dark blue at the threshold


def _ramp_color(value: float, threshold_ms: float) -> str:
    if value > threshold_ms:
        return RED
    t = min(max(value / threshold_ms, 0.0), 1.0)
    r = round(RAMP_LOW[0] + (RAMP_HIGH[0] - RAMP_LOW[0]) * t)
    g = round(RAMP_LOW[1] + (RAMP_HIGH[1] - RAMP_LOW[1]) * t)
    b = round(RAMP_LOW[2] + (RAMP_HIGH[2] - RAMP_LOW[2]) * t)
    return f"#{r:02x}{g:02x}{b:02x}"


def _text_color(fill: str) -> str:
    r, g, b = (int(fill[i : i + 2], 16) for i in (1, 3, 5))
    luminance = 0.299 * r + 0.587 * g + 0.114 * b
    return "#000000" if luminance > 140 else "#ffffff"


def render_heatmap(
    stats: Mapping[tuple[str, str], PairStats],
    metric: str,
    node_order: Sequence[str],
    threshold_ms: float = 60.0,
) -> tuple[str, str]:
    """Render the N x N directed-pair grid as (svg_text, csv_text).

    Rows are reporters, columns are peers. Diagonal cells are blank,
    missing pairs hatched, cells above the threshold filled red, the
    rest on a sequential 0..threshold ramp. The CSV carries raw values
    with empty strings for missing/diagonal cells.
    """
    if metric not in ("mean", "p99"):
        raise ValueError(f"metric must be 'mean' or 'p99', got {metric!r}")
    known = set(node_order)
    for reporter, peer in stats:
        if reporter not in known:
            raise UnknownNode(reporter)
        if peer not in known:
            raise UnknownNode(peer)

    def value_of(s: PairStats) -> float:
        return s.mean_ms if metric == "mean" else s.p99_ms

    n = len(node_order)
    left, top = 90, 60
    width = left + n * CELL + 20
    height = top + n * CELL + 20

    parts: list[str] = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    parts.append(
        '<defs><pattern id="nodata" width="8" height="8" patternUnits="userSpaceOnUse">'
        '<rect width="8" height="8" fill="#f2f2f2"/>'
        '<path d="M0,8 L8,0" stroke="#b0b0b0" stroke-width="1"/>'
        "</pattern></defs>"
    )
    parts.append(f'<rect width="{width}" height="{height}" fill="#ffffff"/>')
    title = f"RTT {metric} per directed pair [ms]  (red &gt; {threshold_ms:g} ms)"
    parts.append(
        f'<text x="{left}" y="20" font-family="sans-serif" font-size="14">{title}</text>'
    )
    for j, peer in enumerate(node_order):
        x = left + j * CELL + CELL // 2
        parts.append(
            f'<text x="{x}" y="{top - 8}" font-family="sans-serif" font-size="12" '
            f'text-anchor="middle">{_esc(peer)}</text>'
        )
    for i, reporter in enumerate(node_order):
        y = top + i * CELL + CELL // 2 + 4
        parts.append(
            f'<text x="{left - 8}" y="{y}" font-family="sans-serif" font-size="12" '
            f'text-anchor="end">{_esc(reporter)}</text>'
        )
    for i, reporter in enumerate(node_order):
        for j, peer in enumerate(node_order):
            x, y = left + j * CELL, top + i * CELL
            if reporter == peer:
                parts.append(
                    f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                    f'fill="#ffffff" stroke="#d9d9d9"/>'
                )
                continue
            s = stats.get((reporter, peer))
            if s is None:
                parts.append(
                    f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                    f'fill="url(#nodata)" stroke="#d9d9d9"/>'
                )
                continue
            value = value_of(s)
            fill = _ramp_color(value, threshold_ms)
            parts.append(
                f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                f'fill="{fill}" stroke="#d9d9d9"/>'
            )
            parts.append(
                f'<text x="{x + CELL // 2}" y="{y + CELL // 2 + 4}" '
                f'font-family="sans-serif" font-size="13" text-anchor="middle" '
                f'fill="{_text_color(fill)}">{value:.1f}</text>'
            )
    parts.append("</svg>")
    svg = "\n".join(parts) + "\n"

    lines = ["," + ",".join(node_order)]
    for reporter in node_order:
        row = [reporter]
        for peer in node_order:
            if reporter == peer:
                row.append("")
            else:
                s = stats.get((reporter, peer))
                row.append("" if s is None else repr(value_of(s)))
        lines.append(",".join(row))
    csv_text = "\n".join(lines) + "\n"
    return svg, csv_text


def parse_heatmap_csv(csv_text: str) -> dict[tuple[str, str], float]:
    """Inverse of the heatmap CSV matrix: (reporter, peer) -> value."""
    lines = [ln for ln in csv_text.splitlines() if ln]
    peers = lines[0].split(",")[1:]
    out: dict[tuple[str, str], float] = {}
    for line in lines[1:]:
        cells = line.split(",")
        reporter = cells[0]
        for peer, cell in zip(peers, cells[1:]):
            if cell:
                out[(reporter, peer)] = float(cell)
    return out


def histogram_csv(hist: Histogram) -> str:
    """Coarse report bins plus the 1 ms bins, one table."""
    lines = ["section,bin,count,fraction"]
    from .analysis import COARSE_BIN_LABELS

    fractions = hist.fractions
    for label, count, frac in zip(COARSE_BIN_LABELS, hist.coarse_counts, fractions):
        lines.append(f"coarse,{label},{count},{frac!r}")
    for b in sorted(hist.fine_counts):
        lines.append(f"fine,{b},{hist.fine_counts[b]},")
    return "\n".join(lines) + "\n"


def histogram_svg(hist: Histogram, threshold_ms: float = 60.0) -> str:
    """Bar chart over the 1 ms bins; bars past the threshold drawn red."""
    left, top, plot_w, plot_h = 60, 40, 640, 300
    width, height = left + plot_w + 20, top + plot_h + 50
    max_bin = max(hist.fine_counts, default=0)
    x_max = max(100, max_bin + 1)
    y_max = max(hist.fine_counts.values(), default=1)
    bar_w = plot_w / x_max

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{left}" y="20" font-family="sans-serif" font-size="14">'
        f"RTT distribution [1 ms bins], n={hist.total}</text>",
    ]
    fr = hist.fractions
    parts.append(
        f'<text x="{left}" y="{top + plot_h + 40}" font-family="sans-serif" font-size="12">'
        f"0-60 ms: {fr[0] * 100:.1f}%   60-100 ms: {fr[1] * 100:.1f}%   "
        f"&gt;100 ms: {fr[2] * 100:.1f}%</text>"
    )
    parts.append(
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" '
        f'stroke="#000000"/>'
    )
    parts.append(
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="#000000"/>'
    )
    for b in sorted(hist.fine_counts):
        if b >= x_max:
            continue
        count = hist.fine_counts[b]
        h = plot_h * count / y_max
        x = left + b * bar_w
        color = RED if b >= threshold_ms else "#2c6aa0"
        parts.append(
            f'<rect x="{x:.2f}" y="{top + plot_h - h:.2f}" width="{max(bar_w, 1.0):.2f}" '
            f'height="{h:.2f}" fill="{color}"/>'
        )
    for tick in range(0, x_max + 1, max(10, x_max // 10)):
        x = left + tick * bar_w
        parts.append(
            f'<text x="{x:.2f}" y="{top + plot_h + 16}" font-family="sans-serif" '
            f'font-size="10" text-anchor="middle">{tick}</text>'
        )
    parts.append(
        f'<text x="{left - 8}" y="{top + 10}" font-family="sans-serif" font-size="10" '
        f'text-anchor="end">{y_max}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def boxplot_svg(groups: Sequence[tuple[str, Sequence[float]]]) -> str:
    """Side-by-side box-and-whisker plot, one box per labeled series."""
    from .analysis import percentile

    left, top, plot_h = 70, 40, 320
    box_w, gap = 56, 40
    plot_w = len(groups) * (box_w + gap) + gap
    width, height = left + plot_w + 20, top + plot_h + 60

    all_values = [v for _, values in groups for v in values]
    lo = min(all_values, default=0.0)
    hi = max(all_values, default=1.0)
    if math.isclose(lo, hi):
        lo, hi = lo - 1.0, hi + 1.0
    span = hi - lo

    def y_of(v: float) -> float:
        return top + plot_h * (1 - (v - lo) / span)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="#000000"/>',
    ]
    for i in range(5):
        v = lo + span * i / 4
        y = y_of(v)
        parts.append(
            f'<text x="{left - 6}" y="{y + 3:.2f}" font-family="sans-serif" font-size="10" '
            f'text-anchor="end">{v:.1f}</text>'
        )
        parts.append(
            f'<line x1="{left - 4}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="#000000"/>'
        )
    for idx, (label, values) in enumerate(groups):
        cx = left + gap + idx * (box_w + gap) + box_w / 2
        if values:
            q1 = percentile(values, 25)
            q2 = percentile(values, 50)
            q3 = percentile(values, 75)
            vmin, vmax = min(values), max(values)
            x0 = cx - box_w / 2
            parts.append(
                f'<line x1="{cx:.2f}" y1="{y_of(vmin):.2f}" x2="{cx:.2f}" '
                f'y2="{y_of(vmax):.2f}" stroke="#555555"/>'
            )
            for v in (vmin, vmax):
                parts.append(
                    f'<line x1="{cx - 12:.2f}" y1="{y_of(v):.2f}" x2="{cx + 12:.2f}" '
                    f'y2="{y_of(v):.2f}" stroke="#555555"/>'
                )
            parts.append(
                f'<rect x="{x0:.2f}" y="{y_of(q3):.2f}" width="{box_w}" '
                f'height="{max(y_of(q1) - y_of(q3), 0.5):.2f}" fill="#9ecae1" stroke="#2c6aa0"/>'
            )
            parts.append(
                f'<line x1="{x0:.2f}" y1="{y_of(q2):.2f}" x2="{x0 + box_w:.2f}" '
                f'y2="{y_of(q2):.2f}" stroke="#08306b" stroke-width="2"/>'
            )
        else:
            parts.append(
                f'<text x="{cx:.2f}" y="{top + plot_h / 2:.2f}" font-family="sans-serif" '
                f'font-size="11" text-anchor="middle">no samples</text>'
            )
        parts.append(
            f'<text x="{cx:.2f}" y="{top + plot_h + 18}" font-family="sans-serif" '
            f'font-size="11" text-anchor="middle">{_esc(label)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
