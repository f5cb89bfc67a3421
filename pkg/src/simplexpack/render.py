"""SVG and TikZ drawings of packings.

2D drawings show the container triangle, the unit grid and the numbered,
gray-shaded shapes.  3D packings are drawn as an orthographic projection,
which is only a viewing aid; the placement JSON stays authoritative.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

from .geometry import Placement, SimplexShape

SCALE = 80  # pixels per unit
MARGIN = 20


def placed_vertices(shape: SimplexShape, t) -> list[tuple[Fraction, ...]]:
    return [tuple(Fraction(a) + b for a, b in zip(t, v)) for v in shape.vertices]


def _project(p) -> tuple[float, float]:
    if len(p) == 2:
        return float(p[0]), float(p[1])
    x, y, z = (float(c) for c in p)
    return (x - y) * math.cos(math.pi / 6), z + (x + y) * 0.5


def _gray(i: int, m: int) -> str:
    level = 150 + (90 * i) // max(m, 1)
    return f"rgb({level},{level},{level})"


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def svg(shapes: Sequence[SimplexShape], placement: Placement) -> str:
    n = shapes[0].dim if shapes else len(placement.translations[0])
    s = Fraction(placement.s)
    corners = [tuple([Fraction(0)] * n)] + [tuple(s if c == k else Fraction(0) for c in range(n)) for k in range(n)]
    pieces = [placed_vertices(sh, t) for sh, t in zip(shapes, placement.translations)]
    pts = [_project(p) for p in corners]
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    x0, y1 = min(xs), max(ys)
    width = (max(xs) - x0) * SCALE + 2 * MARGIN
    height = (y1 - min(ys)) * SCALE + 2 * MARGIN

    def xy(p):
        u, v = _project(p)
        return _fmt((u - x0) * SCALE + MARGIN), _fmt((y1 - v) * SCALE + MARGIN)

    def poly(vs, style):
        coords = " ".join(",".join(xy(v)) for v in vs)
        return f'<polygon points="{coords}" {style}/>'

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}">']
    if n == 2:
        for i in range(1, math.ceil(s)):
            for a, b in (((i, 0), (i, s - i)), ((0, i), (s - i, i)), ((i, 0), (0, i))):
                (ax, ay), (bx, by) = xy(a), xy(b)
                out.append(f'<line x1="{ax}" y1="{ay}" x2="{bx}" y2="{by}" stroke="#ccc" stroke-width="1"/>')
        out.append(poly(corners, 'fill="none" stroke="black" stroke-width="2"'))
        faces = [[vs] for vs in pieces]
    else:
        for a in range(len(corners)):
            for b in range(a + 1, len(corners)):
                (ax, ay), (bx, by) = xy(corners[a]), xy(corners[b])
                out.append(f'<line x1="{ax}" y1="{ay}" x2="{bx}" y2="{by}" stroke="black" stroke-width="2"/>')
        faces = [[[vs[a] for a in range(4) if a != skip] for skip in range(4)] for vs in pieces]
    for i, (vs, fs) in enumerate(zip(pieces, faces)):
        opacity = "" if n == 2 else ' fill-opacity="0.35"'
        for f in fs:
            out.append(poly(f, f'fill="{_gray(i, len(pieces))}"{opacity} stroke="black" stroke-width="1"'))
        centre = tuple(sum(v[c] for v in vs) / len(vs) for c in range(n))
        cx, cy = xy(centre)
        out.append(f'<text x="{cx}" y="{cy}" font-size="14" text-anchor="middle" '
                   f'dominant-baseline="middle">{i + 1}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def tikz(shapes: Sequence[SimplexShape], placement: Placement) -> str:
    """A standalone LaTeX document with the drawing (projected in 3D)."""
    n = shapes[0].dim
    s = Fraction(placement.s)

    def c(p):
        u, v = _project(p)
        return f"({_fmt(u)},{_fmt(v)})"

    corners = [tuple([0] * n)] + [tuple(s if k == j else 0 for k in range(n)) for j in range(n)]
    lines = [r"\documentclass[tikz]{standalone}", r"\begin{document}", r"\begin{tikzpicture}[scale=1.5]"]
    if n == 2:
        for i in range(1, math.ceil(s)):
            lines.append(rf"\draw[gray!40] {c((i, 0))} -- {c((i, s - i))};")
            lines.append(rf"\draw[gray!40] {c((0, i))} -- {c((s - i, i))};")
            lines.append(rf"\draw[gray!40] {c((i, 0))} -- {c((0, i))};")
    for i, (sh, t) in enumerate(zip(shapes, placement.translations)):
        vs = placed_vertices(sh, t)
        shade = 20 + (50 * i) // max(len(shapes), 1)
        lines.append(rf"\filldraw[fill=black!{shade}, fill opacity=0.6] " + " -- ".join(c(v) for v in vs) + " -- cycle;")
        centre = tuple(sum(v[k] for v in vs) / len(vs) for k in range(n))
        lines.append(rf"\node at {c(centre)} {{{i + 1}}};")
    lines.append(r"\draw[thick] " + " -- ".join(c(p) for p in corners) + " -- cycle;")
    if n == 3:
        lines.append(rf"\draw[thick] {c(corners[0])} -- {c(corners[2])};")
        lines.append(rf"\draw[thick] {c(corners[1])} -- {c(corners[3])};")
    lines += [r"\end{tikzpicture}", r"\end{document}"]
    return "\n".join(lines) + "\n"
