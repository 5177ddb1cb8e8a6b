"""Minimal hand-written SVG plots of region frontiers."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

from .. import __version__
from ..regions import BoundaryPolyline, StabilityRegion

WIDTH, HEIGHT = 800, 600
MARGIN = 70


def _corner_vertices(poly: BoundaryPolyline) -> list[tuple[float, float]]:
    """Frontier endpoints plus the interior vertices where the slope changes."""
    v = poly.vertices
    inner = [v[i] for i in range(1, len(v) - 1) if _kink(v, i)]
    return [v[0]] + inner + ([v[-1]] if len(v) > 1 else [])


def _kink(v: Sequence[tuple[float, float]], i: int) -> bool:
    (x0, y0), (x1, y1), (x2, y2) = v[i - 1], v[i], v[i + 1]
    cross = (x1 - x0) * (y2 - y1) - (y1 - y0) * (x2 - x1)
    return abs(cross) > 1e-12


def render_svg(
    curves: Sequence[tuple[str, StabilityRegion, BoundaryPolyline, bool]],
    title: str = "",
) -> str:
    """Overlay frontiers; each curve is (label, region, polyline, dotted).

    Each frontier is closed with a vertical drop from its last vertex to the
    lambda1 axis. Corners are labelled A, B, C, ... in drawing order.
    """
    xmax = max(max(x for x, _ in p.vertices) for _, _, p, _ in curves) or 1.0
    ymax = max(max(y for _, y in p.vertices) for _, _, p, _ in curves) or 1.0
    xmax *= 1.1
    ymax *= 1.1
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x: float) -> float:
        return MARGIN + pw * x / xmax

    def sy(y: float) -> float:
        return HEIGHT - MARGIN - ph * y / ymax

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<!-- cogstab {__version__} -->",
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN / 2}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{MARGIN}" y2="{MARGIN / 2}" stroke="black"/>',
        f'<text x="{WIDTH - MARGIN / 2}" y="{HEIGHT - MARGIN + 20}" font-size="16" text-anchor="end">&#955;1</text>',
        f'<text x="{MARGIN - 10}" y="{MARGIN / 2}" font-size="16" text-anchor="end">&#955;2</text>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH / 2}" y="24" font-size="16" text-anchor="middle">{escape(title)}</text>')

    letters = iter("ABCDEFGHIJKLMNOPQRSTUVWXYZ")
    for i, (label, region, poly, dotted) in enumerate(curves):
        pts = list(poly.vertices) + [(poly.vertices[-1][0], 0.0)]
        d = " ".join(f"{'M' if j == 0 else 'L'}{sx(x):.3f},{sy(y):.3f}" for j, (x, y) in enumerate(pts))
        dash = ' stroke-dasharray="4,4"' if dotted else ""
        parts.append(f'<path d="{d}" fill="none" stroke="black" stroke-width="2"{dash}/>')
        ext = region.lambda1_extent
        tick = "&#946;q11" if region.energy.capacity is not None else "&#948;q11"
        parts.append(
            f'<line x1="{sx(ext):.3f}" y1="{HEIGHT - MARGIN}" x2="{sx(ext):.3f}" y2="{HEIGHT - MARGIN + 6}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{sx(ext):.3f}" y="{HEIGHT - MARGIN + 22 + 16 * i}" font-size="12" '
            f'text-anchor="middle">{tick}={ext:.4g}</text>'
        )
        for x, y in _corner_vertices(poly):
            parts.append(f'<circle cx="{sx(x):.3f}" cy="{sy(y):.3f}" r="3" fill="black"/>')
            parts.append(
                f'<text x="{sx(x) + 6:.3f}" y="{sy(y) - 6:.3f}" font-size="13">{next(letters, "?")}</text>'
            )
        style = "dotted" if dotted else "solid"
        parts.append(
            f'<text x="{WIDTH - MARGIN}" y="{MARGIN + 18 * i}" font-size="12" text-anchor="end">'
            f"{escape(label)} ({style})</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
