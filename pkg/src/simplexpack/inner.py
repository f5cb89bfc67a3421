"""Minimum container side for a fixed multiset of shapes.

The exact solver branches on the disjunction "the translation difference of
a pair lies on or beyond one facet of its Minkowski difference", which is the
same feasible set as the Big-M mixed-integer program but never needs the
constant ``M``.  Node relaxations are solved by :mod:`simplexpack.ratlp`;
children re-optimise their parent's tableau.

The Big-M program itself is still built here for export to external MILP
solvers (:func:`build_bigm_milp`, :func:`export_lp_file`).
"""

from __future__ import annotations

import heapq
import itertools
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import comb
from typing import Optional, Sequence

from .geometry import (
    Facet,
    Placement,
    SimplexShape,
    containment_constants,
    enclosing_side,
    minkowski_difference,
    shape_sort_key,
)
from .ratlp import GE, LE, EQ, IncrementalLP, LinearProgram, LpStatus

SYMMETRY_TYPES = (0, 1, 2)


class InvalidInstanceError(ValueError):
    pass


@dataclass(frozen=True)
class InnerInstance:
    """A multiset of shapes to pack.

    ``cutoff`` is the current global upper bound: the solver may stop as soon
    as it proves the optimum is strictly larger.  ``lower_bound`` is any known
    valid lower bound (for example the optimum of a sub-multiset); it only
    tightens the root relaxation.  Shapes are sorted on construction so that
    copies of the same shape are adjacent.
    """

    shapes: tuple
    cutoff: Optional[Fraction] = None
    symmetry_type: int = 2
    lower_bound: Fraction = Fraction(0)

    def __post_init__(self):
        shapes = tuple(sorted(self.shapes, key=shape_sort_key))
        if not shapes:
            raise InvalidInstanceError("an instance needs at least one shape")
        if len({s.dim for s in shapes}) != 1:
            raise InvalidInstanceError("shapes of mixed dimension")
        if self.symmetry_type not in SYMMETRY_TYPES:
            raise InvalidInstanceError(f"unknown symmetry type {self.symmetry_type}")
        object.__setattr__(self, "shapes", shapes)
        if self.cutoff is not None:
            object.__setattr__(self, "cutoff", Fraction(self.cutoff))
        object.__setattr__(self, "lower_bound", Fraction(self.lower_bound))

    @property
    def dim(self) -> int:
        return self.shapes[0].dim

    @property
    def m(self) -> int:
        return len(self.shapes)

    def pairs(self):
        return itertools.combinations(range(self.m), 2)


class InnerStatus(str, Enum):
    OPTIMAL = "Optimal"
    CUTOFF_EXCEEDED = "CutoffExceeded"  # root relaxation already above the cutoff
    INFEASIBLE_BY_CUTOFF = "Infeasible-by-cutoff"  # every branch ended above the cutoff


@dataclass
class InnerStats:
    nodes: int = 0
    lp_calls: int = 0
    seconds: float = 0.0


@dataclass
class InnerResult:
    """``value`` is the optimum when optimal, otherwise a proven lower bound above the cutoff."""

    status: InnerStatus
    value: Fraction
    placement: Optional[Placement] = None
    stats: InnerStats = field(default_factory=InnerStats)
    assignment: Optional[dict] = None


# ---------------------------------------------------------------------------
# LP rows


def _var(i: int, c: int, n: int) -> int:
    return 1 + n * i + c


def _nvars(inst: InnerInstance) -> int:
    return 1 + inst.dim * inst.m


def containment_rows(inst: InnerInstance) -> list:
    """``n + 1`` rows per shape: coordinate lower bounds and the sum row."""
    n, nv = inst.dim, _nvars(inst)
    rows = []
    for i, shape in enumerate(inst.shapes):
        cc = containment_constants(shape)
        for c in range(n):
            coeffs = [0] * nv
            coeffs[_var(i, c, n)] = 1
            rows.append((coeffs, GE, cc.lower[c]))
        coeffs = [0] * nv
        coeffs[0] = -1
        for c in range(n):
            coeffs[_var(i, c, n)] = 1
        rows.append((coeffs, LE, cc.sum_bound))
    return rows


def symmetry_rows(inst: InnerInstance) -> list:
    """Ordering rows between adjacent copies of the same shape.

    Type 1 orders the first coordinate, type 2 the coordinate sum, type 0
    adds nothing.
    """
    if inst.symmetry_type not in SYMMETRY_TYPES:
        raise InvalidInstanceError(f"unknown symmetry type {inst.symmetry_type}")
    n, nv = inst.dim, _nvars(inst)
    rows = []
    if inst.symmetry_type == 0:
        return rows
    for i in range(inst.m - 1):
        if inst.shapes[i] != inst.shapes[i + 1]:
            continue
        coeffs = [0] * nv
        coords = range(1) if inst.symmetry_type == 1 else range(n)
        for c in coords:
            coeffs[_var(i, c, n)] = 1
            coeffs[_var(i + 1, c, n)] = -1
        rows.append((coeffs, LE, 0))
    return rows


def facet_row(inst: InnerInstance, i: int, j: int, facet: Facet) -> tuple:
    """``normal . (t_j - t_i) >= rhs``: pair ``(i, j)`` sits on or beyond ``facet``."""
    n, nv = inst.dim, _nvars(inst)
    coeffs = [0] * nv
    for c in range(n):
        coeffs[_var(j, c, n)] += facet.normal[c]
        coeffs[_var(i, c, n)] -= facet.normal[c]
    return (coeffs, GE, facet.rhs)


def base_lp(inst: InnerInstance) -> LinearProgram:
    n, nv = inst.dim, _nvars(inst)
    objective = [1] + [0] * (nv - 1)
    floor_row = ([1] + [0] * (nv - 1), GE,
                 max([inst.lower_bound] + [enclosing_side(s) for s in inst.shapes]))
    rows = [floor_row] + containment_rows(inst) + symmetry_rows(inst)
    return LinearProgram(objective, rows, variable_names(inst.m, n))


def variable_names(m: int, n: int) -> list[str]:
    coords = "xyw"[:n]
    return ["s"] + [f"{c}_{i + 1}" for i in range(m) for c in coords]


def placement_from_point(inst: InnerInstance, point) -> Placement:
    n = inst.dim
    return Placement(point[0], tuple(tuple(point[_var(i, c, n)] for c in range(n))
                                     for i in range(inst.m)))


# ---------------------------------------------------------------------------
# branch and bound


class _Node:
    __slots__ = ("lp", "parent", "row", "assignment", "depth")

    def __init__(self, lp, parent, row, assignment, depth):
        self.lp = lp  # IncrementalLP once evaluated
        self.parent = parent  # IncrementalLP of the parent while pending
        self.row = row
        self.assignment = assignment
        self.depth = depth


def _overlap_depths(inst: InnerInstance, regions, point, assignment):
    """Pairs whose difference vector lies strictly inside their region, with depth."""
    n = inst.dim
    den = 1
    for q in point:
        den = den * q.denominator // _gcd(den, q.denominator)
    ip = [int(q * den) for q in point]
    out = []
    for (i, j), region in regions.items():
        if (i, j) in assignment:
            continue
        d = [ip[_var(j, c, n)] - ip[_var(i, c, n)] for c in range(n)]
        depth = min(f.rhs * den - sum(a * b for a, b in zip(f.normal, d)) for f in region.facets)
        if depth > 0:
            out.append((Fraction(depth, den), (i, j)))
    return out


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def solve_inner(inst: InnerInstance) -> InnerResult:
    """Exact minimum side for ``inst``.

    Best-first search over facet assignments.  A node relaxation above the
    cutoff is pruned; relaxations equal to the cutoff are kept so that ties
    with the global bound are reported as optimal.  The first popped node
    whose relaxation point is already a packing is optimal.
    """
    start = time.perf_counter()
    stats = InnerStats()
    regions = {(i, j): minkowski_difference(inst.shapes[i], inst.shapes[j])
               for i, j in inst.pairs()}
    cutoff = inst.cutoff

    status, root = IncrementalLP.solve(base_lp(inst))
    stats.lp_calls += 1
    if status is not LpStatus.OPTIMAL:  # cannot happen: every shape fits for large s
        raise RuntimeError(f"root relaxation is {status.value}")

    def finish(status, value, placement=None, assignment=None):
        stats.seconds = time.perf_counter() - start
        return InnerResult(status, value, placement, stats, assignment)

    if cutoff is not None and root.value > cutoff:
        return finish(InnerStatus.CUTOFF_EXCEEDED, root.value)

    counter = itertools.count()
    heap = [(root.value, 0, next(counter), _Node(root, None, None, {}, 0))]
    best_pruned = None  # smallest bound among nodes cut off

    while heap:
        key, _, _, node = heapq.heappop(heap)
        if cutoff is not None and key > cutoff:
            best_pruned = key if best_pruned is None else min(best_pruned, key)
            break
        if node.lp is None:
            stats.lp_calls += 1
            st, child = node.parent.child([node.row], cutoff)
            node.parent = None
            if st is None:
                bound = child
                best_pruned = bound if best_pruned is None else min(best_pruned, bound)
                continue
            if st is not LpStatus.OPTIMAL:
                continue
            node.lp = child
            if child.value > key:
                heapq.heappush(heap, (child.value, -node.depth, next(counter), node))
                continue
        stats.nodes += 1
        point = node.lp.point()
        overlaps = _overlap_depths(inst, regions, point, node.assignment)
        if not overlaps:
            return finish(InnerStatus.OPTIMAL, node.lp.value,
                          placement_from_point(inst, point), dict(node.assignment))
        # most interior pair first; ties go to the first pair in order
        _, (i, j) = max(overlaps, key=lambda t: (t[0], -t[1][0], -t[1][1]))
        for f, facet in enumerate(regions[(i, j)].facets):
            assignment = dict(node.assignment)
            assignment[(i, j)] = f
            child = _Node(None, node.lp, facet_row(inst, i, j, facet), assignment, node.depth + 1)
            heapq.heappush(heap, (node.lp.value, -child.depth, next(counter), child))

    if best_pruned is None:
        raise RuntimeError("search exhausted without a packing")
    return finish(InnerStatus.INFEASIBLE_BY_CUTOFF, best_pruned)


def brute_force_inner(inst: InnerInstance) -> Optional[tuple]:
    """Minimum over every complete facet assignment, one LP each.

    Independent of the search above: no pruning, no warm starts, no
    symmetry rows.  Returns ``(value, placement)``.
    """
    from .ratlp import solve_lp

    plain = InnerInstance(inst.shapes, symmetry_type=0)
    base = base_lp(plain)
    pairs = list(plain.pairs())
    regions = [minkowski_difference(plain.shapes[i], plain.shapes[j]).facets for i, j in pairs]
    best = None
    for choice in itertools.product(*[range(len(r)) for r in regions]):
        rows = [facet_row(plain, i, j, regions[p][f]) for p, ((i, j), f) in enumerate(zip(pairs, choice))]
        out = solve_lp(base.extended(rows))
        if out.status is LpStatus.OPTIMAL and (best is None or out.value < best[0]):
            best = (out.value, placement_from_point(plain, out.point))
    return best


# ---------------------------------------------------------------------------
# Big-M model


def big_m_value(facet: Facet, shat) -> Fraction:
    """``(sum |normal|) * shat + rhs``: large enough to switch off the facet row."""
    return sum(abs(c) for c in facet.normal) * Fraction(shat) + facet.rhs


@dataclass
class BigMModel:
    """Mixed-integer program with named variables.

    ``rows`` are ``(coeffs: dict[name, Fraction], relation, rhs)``; every
    variable is free unless listed in ``binaries``.
    """

    variables: list
    binaries: list
    objective: dict
    rows: list
    row_names: list

    @property
    def num_continuous(self) -> int:
        return len(self.variables) - len(self.binaries)

    @property
    def num_binary(self) -> int:
        return len(self.binaries)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def __eq__(self, other):
        if not isinstance(other, BigMModel):
            return NotImplemented
        norm = lambda rows: [({k: v for k, v in c.items() if v}, r, b) for c, r, b in rows]  # noqa: E731
        return (self.variables == other.variables and self.binaries == other.binaries
                and {k: v for k, v in self.objective.items() if v}
                == {k: v for k, v in other.objective.items() if v}
                and norm(self.rows) == norm(other.rows) and self.row_names == other.row_names)


def build_bigm_milp(inst: InnerInstance, shat, with_symmetry: bool = False) -> BigMModel:
    """The Big-M program: containment rows, then per pair the cover row and one row per facet."""
    shat = Fraction(shat)
    n, m = inst.dim, inst.m
    names = variable_names(m, n)
    rows, row_names = [], []

    def named(coeffs):
        return {names[k]: Fraction(c) for k, c in enumerate(coeffs) if c}

    for k, (coeffs, rel, rhs) in enumerate(containment_rows(inst)):
        rows.append((named(coeffs), rel, Fraction(rhs)))
        row_names.append(f"contain_{k // (n + 1) + 1}_{k % (n + 1) + 1}")
    binaries = []
    for i, j in inst.pairs():
        facets = minkowski_difference(inst.shapes[i], inst.shapes[j]).facets
        zs = [f"z_{i + 1}_{j + 1}_{f + 1}" for f in range(len(facets))]
        binaries += zs
        rows.append(({z: Fraction(1) for z in zs}, GE, Fraction(1)))
        row_names.append(f"cover_{i + 1}_{j + 1}")
        for f, facet in enumerate(facets):
            coeffs, _, rhs = facet_row(inst, i, j, facet)
            big = big_m_value(facet, shat)
            # normal.(t_j - t_i) >= rhs - M (1 - z)  <=>  normal.(t_j - t_i) - M z >= rhs - M
            row = named(coeffs)
            row[zs[f]] = -big
            rows.append((row, GE, Fraction(rhs) - big))
            row_names.append(f"sep_{i + 1}_{j + 1}_{f + 1}")
    if with_symmetry:
        for k, (coeffs, rel, rhs) in enumerate(symmetry_rows(inst)):
            rows.append((named(coeffs), rel, Fraction(rhs)))
            row_names.append(f"sym_{k + 1}")
    return BigMModel(names + binaries, binaries, {"s": Fraction(1)}, rows, row_names)


def bigm_census(m: int) -> tuple[int, int, int]:
    """Variable and row counts of the 2D Big-M program with ``m`` triangles."""
    return 1 + 2 * m, 6 * comb(m, 2), 3 * m + 7 * comb(m, 2)


def _lcm(a, b):
    return a * b // _gcd(a, b)


def _term(coef: int, name: str, first: bool) -> str:
    sign = "-" if coef < 0 else ("" if first else "+")
    mag = abs(coef)
    body = name if mag == 1 else f"{mag} {name}"
    return f"{sign} {body}".strip() if first else f"{sign} {body}"


def _expr(coeffs: dict, order: list) -> tuple[str, int]:
    scale = 1
    for v in coeffs.values():
        scale = _lcm(scale, Fraction(v).denominator)
    parts = []
    for name in order:
        c = coeffs.get(name)
        if c:
            parts.append(_term(int(c * scale), name, not parts))
    return (" ".join(parts) if parts else "0 s"), scale


def format_lp(model: BigMModel) -> str:
    """CPLEX LP text.  Rows with fractional data are multiplied to integers;
    a ``\\ scale`` comment records the factor so the reader can undo it."""
    order = model.variables
    out = ["\\ minimum container side, Big-M formulation", "Minimize"]
    expr, _ = _expr(model.objective, order)
    out.append(f" obj: {expr}")
    out.append("Subject To")
    for name, (coeffs, rel, rhs) in zip(model.row_names, model.rows):
        scale = _lcm(_expr(coeffs, order)[1], Fraction(rhs).denominator)
        scaled = {k: v * scale for k, v in coeffs.items()}
        expr, _ = _expr(scaled, order)
        if scale != 1:
            out.append(f"\\ scale {name} {scale}")
        out.append(f" {name}: {expr} {rel} {int(rhs * scale)}")
    out.append("Bounds")
    for v in order:
        if v not in model.binaries:
            out.append(f" {v} free")
    out.append("Binaries")
    for v in model.binaries:
        out.append(f" {v}")
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp_file(model: BigMModel, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_lp(model))


_TERM = re.compile(r"([+-]?)\s*(\d+)?\s*([A-Za-z_][A-Za-z0-9_]*)")


def _parse_expr(text: str) -> dict:
    coeffs = {}
    for sign, num, name in _TERM.findall(text):
        c = Fraction(int(num) if num else 1)
        coeffs[name] = coeffs.get(name, 0) + (-c if sign == "-" else c)
    return coeffs


def parse_lp(text: str) -> BigMModel:
    """Read LP text written by :func:`format_lp`."""
    section = None
    scales = {}
    objective, rows, row_names, variables, binaries = {}, [], [], [], []
    seen = set()

    def note(names):
        for v in names:
            if v not in seen:
                seen.add(v)
                variables.append(v)

    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            parts = line[1:].split()
            if len(parts) == 3 and parts[0] == "scale":
                scales[parts[1]] = int(parts[2])
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "binaries", "end"):
            section = low
            continue
        if section == "minimize":
            _, expr = line.split(":", 1)
            objective = _parse_expr(expr)
            note(objective)
        elif section == "subject to":
            name, body = (p.strip() for p in line.split(":", 1))
            m = re.match(r"(.*?)(<=|>=|=)\s*(-?\d+)\s*$", body)
            if not m:
                raise ValueError(f"cannot parse row {line!r}")
            coeffs = _parse_expr(m.group(1))
            scale = scales.get(name, 1)
            rows.append(({k: v / scale for k, v in coeffs.items()}, m.group(2),
                         Fraction(int(m.group(3)), scale)))
            row_names.append(name)
            note(coeffs)
        elif section == "bounds":
            note([line.split()[0]])
        elif section == "binaries":
            binaries.extend(line.split())
            note(line.split())
    cont = [v for v in variables if v not in binaries]
    return BigMModel(cont + binaries, binaries, objective, rows, row_names)


def read_lp_file(path) -> BigMModel:
    with open(path, encoding="ascii") as fh:
        return parse_lp(fh.read())


def assignment_rows(inst: InnerInstance, assignment: dict) -> list:
    """Facet rows for a (partial) assignment ``{(i, j): facet index}``."""
    rows = []
    for (i, j), f in sorted(assignment.items()):
        facet = minkowski_difference(inst.shapes[i], inst.shapes[j]).facets[f]
        rows.append(facet_row(inst, i, j, facet))
    return rows


def placement_assignment(inst: InnerInstance, placement: Placement) -> dict:
    """For every pair, the first facet the placement sits on or beyond."""
    out = {}
    for i, j in inst.pairs():
        region = minkowski_difference(inst.shapes[i], inst.shapes[j])
        d = [b - a for a, b in zip(placement.translations[i], placement.translations[j])]
        out[(i, j)] = next(f for f, facet in enumerate(region.facets) if facet.value(d) >= facet.rhs)
    return out


def solve_milp_brute(model: BigMModel) -> Optional[Fraction]:
    """Minimum of a :class:`BigMModel` by enumerating every binary vector.

    Only for tiny models; serves as an independent reference for exported
    programs.
    """
    from .ratlp import solve_lp

    cont = [v for v in model.variables if v not in model.binaries]
    index = {v: k for k, v in enumerate(cont)}
    best = None
    for bits in itertools.product((0, 1), repeat=len(model.binaries)):
        fixed = dict(zip(model.binaries, bits))
        rows = []
        for coeffs, rel, rhs in model.rows:
            vec = [Fraction(0)] * len(cont)
            b = Fraction(rhs)
            for name, c in coeffs.items():
                if name in fixed:
                    b -= c * fixed[name]
                else:
                    vec[index[name]] += c
            if not any(vec):
                ok = {LE: 0 <= b, GE: 0 >= b, EQ: b == 0}[rel]
                if not ok:
                    break
                continue
            rows.append((vec, rel, b))
        else:
            obj = [model.objective.get(v, 0) for v in cont]
            out = solve_lp(LinearProgram(obj, rows))
            if out.status is LpStatus.OPTIMAL and (best is None or out.value < best):
                best = out.value
    return best
