"""Exact lattice geometry for unimodular simplices in dimension 2 and 3.

A shape is stored by the ``n`` non-origin vertices of a lattice simplex whose
remaining vertex sits at the origin.  Everything here works on Python ints and
:class:`fractions.Fraction`; nothing is ever rounded.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import floor, gcd
from typing import Iterable, Sequence

import numpy as np

Vector = tuple[int, ...]


class InvalidShapeError(ValueError):
    """Raised for vertex data that is not a unimodular simplex."""


class DegenerateHullError(ValueError):
    """Raised when a point set does not span the ambient space."""


def _det(rows: Sequence[Sequence[int]]) -> int:
    n = len(rows)
    if n == 2:
        (a, b), (c, d) = rows
        return a * d - b * c
    if n == 3:
        (a, b, c), (d, e, f), (g, h, i) = rows
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    raise ValueError(f"unsupported dimension {n}")


@dataclass(frozen=True, order=True)
class SimplexShape:
    """Lattice simplex ``conv(0, v_1, ..., v_n)`` with ``|det(v_1..v_n)| = 1``."""

    columns: tuple[Vector, ...]

    def __post_init__(self):
        cols = tuple(tuple(int(c) for c in v) for v in self.columns)
        object.__setattr__(self, "columns", cols)
        n = len(cols)
        if n not in (2, 3) or any(len(v) != n for v in cols):
            raise InvalidShapeError(f"expected {n} vectors of length {n}: {cols}")
        if abs(_det(cols)) != 1:
            raise InvalidShapeError(f"determinant of {cols} is not +-1")

    @property
    def dim(self) -> int:
        return len(self.columns)

    @property
    def vertices(self) -> tuple[Vector, ...]:
        return ((0,) * self.dim,) + self.columns

    def __str__(self):
        return ";".join(",".join(str(c) for c in v) for v in self.columns)


def standard_simplex(n: int) -> SimplexShape:
    return SimplexShape(tuple(tuple(int(i == j) for j in range(n)) for i in range(n)))


def _rebased(vertices: Sequence[Vector], base: Vector) -> tuple[Vector, ...]:
    return tuple(sorted((tuple(a - b for a, b in zip(v, base)) for v in vertices if v is not base), reverse=True))


def canonicalize(shape: SimplexShape) -> SimplexShape:
    """Representative of the translation class of ``shape``.

    Every vertex is tried as the origin; the remaining vertices are sorted in
    decreasing order and the lexicographically largest list wins.  This keeps the standard simplex
    in its usual form ``{e_1, ..., e_n}``.
    """
    verts = shape.vertices
    best = max(_rebased(verts, b) for b in verts)
    return SimplexShape(best)


def shape_from_vertices(vertices: Iterable[Sequence[int]]) -> SimplexShape:
    """Canonical shape of the simplex with the given ``n + 1`` lattice vertices."""
    verts = [tuple(int(c) for c in v) for v in vertices]
    base = verts[0]
    return canonicalize(SimplexShape(_rebased(verts, base)))


def enclosing_side(shape: SimplexShape) -> Fraction:
    """Smallest side of a standard simplex containing a translate of ``shape``."""
    verts = shape.vertices
    top = max(sum(v) for v in verts)
    low = sum(min(v[j] for v in verts) for j in range(shape.dim))
    return Fraction(top - low)


@dataclass(frozen=True)
class ContainmentConstants:
    """Per-shape containment bounds.

    A translate ``t + shape`` lies in the closed simplex of side ``s`` iff
    ``t_j >= lower[j]`` for every coordinate and ``sum(t) - s <= sum_bound``.
    """

    lower: tuple[Fraction, ...]
    sum_bound: Fraction


def containment_constants(shape: SimplexShape) -> ContainmentConstants:
    verts = shape.vertices
    lower = tuple(Fraction(max(-v[j] for v in verts)) for j in range(shape.dim))
    return ContainmentConstants(lower, Fraction(min(-sum(v) for v in verts)))


def _matrix_entries(bound: int, n: int) -> np.ndarray:
    axis = np.arange(-bound, bound + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * (n * n)), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _unimodular_matrices(bound: int, n: int) -> np.ndarray:
    m = _matrix_entries(bound, n)
    if n == 2:
        det = m[:, 0] * m[:, 3] - m[:, 1] * m[:, 2]
    else:
        a, b, c, d, e, f, g, h, i = (m[:, j] for j in range(9))
        det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    return m[np.abs(det) == 1]


def shape_sort_key(shape: SimplexShape):
    return (enclosing_side(shape), shape.columns)


@lru_cache(maxsize=None)
def _enumerate(n: int, sbar: Fraction) -> tuple[SimplexShape, ...]:
    bound = floor(sbar)
    found = set()
    for row in _unimodular_matrices(bound, n):
        cols = tuple(tuple(int(x) for x in row[k * n:(k + 1) * n]) for k in range(n))
        verts = ((0,) * n,) + cols
        top = max(sum(v) for v in verts)
        low = sum(min(v[j] for v in verts) for j in range(n))
        if top - low > sbar:
            continue
        found.add(canonicalize(SimplexShape(cols)))
    return tuple(sorted(found, key=shape_sort_key))


def enumerate_shapelist(n: int, sbar) -> list[SimplexShape]:
    """All translation classes of unimodular n-simplices fitting in side ``sbar``.

    Two vertices inside a closed simplex of side ``sbar`` differ by at most
    ``sbar`` in every coordinate, so matrix entries in ``[-floor(sbar),
    floor(sbar)]`` reach every class.  Shapes are ordered by enclosing side
    first, so the list for a smaller bound is a prefix of the list for a
    larger one and multiset indices stay valid across bounds.
    """
    sbar = Fraction(sbar)
    if n not in (2, 3):
        raise ValueError(f"unsupported dimension {n}")
    if sbar < 1:
        return []
    return list(_enumerate(n, sbar))


# ---------------------------------------------------------------------------
# convex hulls


@dataclass(frozen=True, order=True)
class Facet:
    """Closed halfspace ``normal . x <= rhs`` with primitive integer data."""

    normal: Vector
    rhs: int

    def value(self, point) -> Fraction:
        return sum(Fraction(a) * b for a, b in zip(self.normal, point))


def _primitive_facet(normal: Sequence[int], rhs: int) -> Facet:
    g = 0
    for c in normal:
        g = gcd(g, c)
    g = gcd(g, rhs)
    return Facet(tuple(c // g for c in normal), rhs // g)


def _sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _cross(u, v):
    return (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])


def _hull_2d(points: list[Vector]) -> list[Facet]:
    pts = sorted(set(points))

    def turn(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[Vector] = []
    for p in pts:
        while len(lower) >= 2 and turn(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Vector] = []
    for p in reversed(pts):
        while len(upper) >= 2 and turn(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    ring = lower[:-1] + upper[:-1]
    if len(ring) < 3:
        raise DegenerateHullError("points are collinear")
    facets = []
    for a, b in zip(ring, ring[1:] + ring[:1]):
        # counter-clockwise ring: the outward normal is the edge rotated clockwise
        normal = (b[1] - a[1], a[0] - b[0])
        facets.append(_primitive_facet(normal, _dot(normal, a)))
    return facets


def _hull_3d(points: list[Vector]) -> list[Facet]:
    pts = sorted(set(points))
    # initial tetrahedron
    p0 = pts[0]
    try:
        p1 = next(p for p in pts if p != p0)
        p2 = next(p for p in pts if any(_cross(_sub(p1, p0), _sub(p, p0))))
        nrm = _cross(_sub(p1, p0), _sub(p2, p0))
        p3 = next(p for p in pts if _dot(nrm, _sub(p, p0)) != 0)
    except StopIteration:
        raise DegenerateHullError("points do not span 3-space") from None
    centroid4 = tuple(sum(c) for c in zip(p0, p1, p2, p3))  # 4 * centroid

    def oriented(a, b, c):
        n = _cross(_sub(b, a), _sub(c, a))
        # interior point 4*centroid must be on the negative side
        if _dot(n, _sub(centroid4, tuple(4 * x for x in a))) > 0:
            return (a, c, b)
        return (a, b, c)

    faces = {oriented(*f) for f in itertools.combinations((p0, p1, p2, p3), 3)}

    def above(face, p):
        a, b, c = face
        return _dot(_cross(_sub(b, a), _sub(c, a)), _sub(p, a)) > 0

    for p in pts:
        visible = [f for f in faces if above(f, p)]
        if not visible:
            continue
        edges = set()
        for a, b, c in visible:
            edges.update(((a, b), (b, c), (c, a)))
        horizon = [e for e in edges if (e[1], e[0]) not in edges]
        faces.difference_update(visible)
        faces.update((a, b, p) for a, b in horizon)

    facets = set()
    for a, b, c in faces:
        normal = _cross(_sub(b, a), _sub(c, a))
        facets.add(_primitive_facet(normal, _dot(normal, a)))
    return list(facets)


def convex_hull(points: Iterable[Sequence[int]], dim: int) -> list[Facet]:
    """Facets of the convex hull of integer points, sorted by ``(normal, rhs)``.

    Normals are primitive and point outward, so the hull is
    ``{x : normal . x <= rhs for every facet}``.
    """
    pts = [tuple(int(c) for c in p) for p in points]
    if any(len(p) != dim for p in pts):
        raise ValueError("point dimension mismatch")
    if dim == 2:
        facets = _hull_2d(pts)
    elif dim == 3:
        facets = _hull_3d(pts)
    else:
        raise ValueError(f"unsupported dimension {dim}")
    return sorted(set(facets))


@dataclass(frozen=True)
class MinkowskiRegion:
    """``T_i - T_j`` in both H- and V-representation."""

    facets: tuple[Facet, ...]
    vertices: tuple[Vector, ...]

    def depth(self, point) -> Fraction:
        """``min_f (rhs_f - normal_f . point)``; positive iff ``point`` is interior."""
        return min(f.rhs - f.value(point) for f in self.facets)


def difference_points(si: SimplexShape, sj: SimplexShape) -> tuple[Vector, ...]:
    """All ``(n+1)^2`` pairwise vertex differences ``v_i - v_j``."""
    return tuple(_sub(a, b) for b in sj.vertices for a in si.vertices)


@lru_cache(maxsize=None)
def minkowski_difference(si: SimplexShape, sj: SimplexShape) -> MinkowskiRegion:
    if si.dim != sj.dim:
        raise ValueError("shapes of different dimension")
    pts = difference_points(si, sj)
    return MinkowskiRegion(tuple(convex_hull(pts, si.dim)), pts)


# ---------------------------------------------------------------------------
# placements


@dataclass(frozen=True)
class Placement:
    """Container side plus one translation vector per shape."""

    s: Fraction
    translations: tuple[tuple[Fraction, ...], ...]

    def to_json(self) -> dict:
        return {
            "s": _frac_str(self.s),
            "translations": [[_frac_str(c) for c in t] for t in self.translations],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Placement":
        return cls(
            Fraction(data["s"]),
            tuple(tuple(Fraction(c) for c in t) for t in data["translations"]),
        )


def _frac_str(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def verify_packing(shapes: Sequence[SimplexShape], placement: Placement) -> bool:
    """Check containment and pairwise interior-disjointness exactly."""
    s = Fraction(placement.s)
    if len(shapes) != len(placement.translations):
        return False
    for shape, t in zip(shapes, placement.translations):
        for v in shape.vertices:
            p = [Fraction(a) + b for a, b in zip(t, v)]
            if min(p) < 0 or sum(p) > s:
                return False
    for i, j in itertools.combinations(range(len(shapes)), 2):
        region = minkowski_difference(shapes[i], shapes[j])
        d = [Fraction(b) - a for a, b in zip(placement.translations[i], placement.translations[j])]
        if region.depth(d) > 0:
            return False
    return True


# ---------------------------------------------------------------------------
# shapelist file


def format_shapelist(shapes: Sequence[SimplexShape], dim: int, sbar) -> str:
    sbar = Fraction(sbar)
    lines = [f"# dim={dim} sbar={sbar.numerator}/{sbar.denominator} count={len(shapes)}"]
    for shape in shapes:
        lines.append(f"{dim};{shape}")
    return "\n".join(lines) + "\n"


def parse_shape_line(line: str) -> SimplexShape:
    parts = line.strip().split(";")
    n = int(parts[0])
    cols = tuple(tuple(int(c) for c in p.split(",")) for p in parts[1:])
    if len(cols) != n:
        raise InvalidShapeError(f"expected {n} vectors in {line!r}")
    return SimplexShape(cols)


def parse_shapelist(text: str) -> list[SimplexShape]:
    shapes = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("dim=") or line.startswith("#"):
            continue
        shapes.append(parse_shape_line(line))
    return shapes
