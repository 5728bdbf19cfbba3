"""Deterministic SVG drawing of a graphical record.

Crosses mark atoms, vertical segments are solid while a particle is alive
and dotted after its death, horizontal segments join each atom to its
parent (or to the left edge for a root). Sink lines run to the right edge.
"""

from __future__ import annotations

from .record import GraphicalRecord

TREE_COLORS = ("#c0392b", "#27ae60")
PLAIN = "#222222"


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def tree_roots(record: GraphicalRecord) -> list[int]:
    """Root vertex of every vertex."""
    root = list(range(len(record)))
    for v in sorted(range(len(record)), key=lambda v: (record.births[v], record.labels[v])):
        p = record.parent[v]
        if p >= 0:
            root[v] = root[p]
    return root


def record_to_svg(record: GraphicalRecord, width: int = 600, height: int = 400, margin: int = 30,
                  color_trees: bool = True) -> str:
    x_lo, x_hi, t_max = record.horizon
    span_x = (x_hi - x_lo) or 1.0
    span_t = t_max or 1.0

    def px(u):
        return margin + (u - x_lo) / span_x * width

    def py(t):
        return margin + height - min(t, t_max) / span_t * height

    roots = tree_roots(record)
    order = sorted({r for r in roots}, key=lambda r: (record.births[r], record.labels[r]))
    shade = {r: TREE_COLORS[i % 2] for i, r in enumerate(order)}

    def color(v):
        return shade[roots[v]] if color_trees and v >= 0 else PLAIN

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width + 2 * margin}" '
        f'height="{height + 2 * margin}" viewBox="0 0 {width + 2 * margin} {height + 2 * margin}">',
        f'<g class="axes" stroke="#000000" stroke-width="1" fill="none">'
        f'<line x1="{margin}" y1="{margin + height}" x2="{margin + width}" y2="{margin + height}"/>'
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{margin + height}"/>'
        f'<line x1="{margin + width}" y1="{margin}" x2="{margin + width}" y2="{margin + height}"/>'
        f'</g>',
    ]
    for u, b, end, v, dead in record.vertical_segments:
        x = _fmt(px(u))
        out.append(f'<line class="alive" x1="{x}" y1="{_fmt(py(b))}" x2="{x}" y2="{_fmt(py(end))}" '
                   f'stroke="{color(v)}" stroke-width="1.5"/>')
        if dead and end < t_max:
            out.append(f'<line class="dead" x1="{x}" y1="{_fmt(py(end))}" x2="{x}" y2="{_fmt(py(t_max))}" '
                       f'stroke="{color(v)}" stroke-width="1" stroke-dasharray="2,3"/>')
    for t, x_from, x_to, child in record.horizontal_segments:
        if child >= 0 and record.parent[child] < 0:
            kind = "root-link"
        elif child < 0:
            kind = "sink-link"
        else:
            kind = "parent-link"
        out.append(f'<line class="{kind}" x1="{_fmt(px(x_from))}" y1="{_fmt(py(t))}" x2="{_fmt(px(x_to))}" '
                   f'y2="{_fmt(py(t))}" stroke="{color(child)}" stroke-width="1"/>')
    for v in range(len(record)):
        if record.is_source[v]:
            continue
        x, y = px(record.labels[v]), py(record.births[v])
        out.append(f'<path class="atom" d="M{_fmt(x - 3)},{_fmt(y - 3)}L{_fmt(x + 3)},{_fmt(y + 3)}'
                   f'M{_fmt(x - 3)},{_fmt(y + 3)}L{_fmt(x + 3)},{_fmt(y - 3)}" stroke="{color(v)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
