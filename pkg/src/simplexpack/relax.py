"""Quadratic reformulations of the inner problem and their SDP relaxations.

Three homogeneous QCQPs are built for an :class:`~simplexpack.inner.InnerInstance`:

* ``qcqp1``: facet indicator variables ``z`` with ``z (t - z) = 0`` and the
  products ``z * (facet row)``;
* ``qcqp2``: one separating hyperplane ``(normal, offset)`` per pair with unit
  normal;
* ``qcqp3``: one Farkas certificate per pair against the vertex list of the
  Minkowski difference.

Every linear term is multiplied by the extra variable ``t`` with ``t^2 = 1``,
so each constraint reads ``w^T A w  rel  b``.  Dropping ``X = w w^T`` in
favour of ``X >= 0`` gives the SDP, which is exported in SDPA sparse format.
Nothing here solves an SDP.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Optional, Sequence

from .geometry import Placement, containment_constants, difference_points, minkowski_difference
from .inner import InnerInstance, assignment_rows, base_lp, placement_assignment
from .ratlp import EQ, GE, LE, LinearProgram, LpStatus, solve_lp


class NonHomogeneousError(ValueError):
    """A constraint still has linear terms; the builder forgot to multiply by ``t``."""


@dataclass
class QuadConstraint:
    """``sum coeffs[(a, b)] * w_a * w_b  rel  rhs`` with ``a <= b``."""

    coeffs: dict
    rel: str
    rhs: Fraction
    name: str
    linear: dict = field(default_factory=dict)

    def matrix(self, dim: int) -> list[list[Fraction]]:
        """The symmetric matrix ``A`` with ``w^T A w`` equal to the form."""
        return full_matrix(_symmetric(self.coeffs), dim)


@dataclass
class QcqpModel:
    kind: int
    variables: list
    roles: dict
    constraints: list
    objective: dict  # monomial coefficients, minimised

    @property
    def t(self) -> int:
        return self.variables.index("t")

    def index(self, name: str) -> int:
        return self.variables.index(name)

    def objective_matrix(self) -> list[list[Fraction]]:
        return full_matrix(_symmetric(self.objective), len(self.variables))


class _Builder:
    def __init__(self, kind):
        self.kind = kind
        self.variables: list[str] = []
        self.roles: dict[str, str] = {}
        self.constraints: list[QuadConstraint] = []

    def var(self, name, role):
        self.variables.append(name)
        self.roles[name] = role
        return len(self.variables) - 1

    def add(self, terms, rel, rhs, name):
        coeffs: dict = {}
        for c, a, b in terms:
            if not c:
                continue
            key = (min(a, b), max(a, b))
            coeffs[key] = coeffs.get(key, 0) + Fraction(c)
        coeffs = {k: v for k, v in coeffs.items() if v}
        self.constraints.append(QuadConstraint(coeffs, rel, Fraction(rhs), name))

    def model(self, objective):
        return QcqpModel(self.kind, self.variables, self.roles, self.constraints, objective)


def _translation_vars(b: _Builder, inst: InnerInstance):
    coords = "xyw"[: inst.dim]
    s = b.var("s", "side")
    tr = [[b.var(f"{c}_{i + 1}", "translation") for c in coords] for i in range(inst.m)]
    return s, tr


def _containment(b: _Builder, inst: InnerInstance, s, tr, t):
    for i, shape in enumerate(inst.shapes):
        cc = containment_constants(shape)
        for c in range(inst.dim):
            b.add([(1, t, tr[i][c])], GE, cc.lower[c], f"contain_{i + 1}_{c + 1}")
        b.add([(1, t, tr[i][c]) for c in range(inst.dim)] + [(-1, t, s)], LE, cc.sum_bound,
              f"contain_{i + 1}_{inst.dim + 1}")


def build_qcqp1(inst: InnerInstance) -> QcqpModel:
    b = _Builder(1)
    s, tr = _translation_vars(b, inst)
    zs = {}
    for i, j in inst.pairs():
        region = minkowski_difference(inst.shapes[i], inst.shapes[j])
        zs[(i, j)] = [b.var(f"z_{i + 1}_{j + 1}_{f + 1}", "indicator") for f in range(len(region.facets))]
    t = b.var("t", "homogenizer")
    _containment(b, inst, s, tr, t)
    for i, j in inst.pairs():
        region = minkowski_difference(inst.shapes[i], inst.shapes[j])
        z = zs[(i, j)]
        b.add([(1, t, zf) for zf in z], GE, 1, f"cover_{i + 1}_{j + 1}")
        for f, facet in enumerate(region.facets):
            terms = [(-facet.rhs, z[f], t)]
            for c in range(inst.dim):
                terms += [(facet.normal[c], z[f], tr[j][c]), (-facet.normal[c], z[f], tr[i][c])]
            b.add(terms, GE, 0, f"sep_{i + 1}_{j + 1}_{f + 1}")
        for f in range(len(region.facets)):
            b.add([(1, z[f], t), (-1, z[f], z[f])], EQ, 0, f"binary_{i + 1}_{j + 1}_{f + 1}")
    b.add([(1, t, t)], EQ, 1, "homogenize")
    return b.model({(s, t): Fraction(1)})


_NORMAL_NAMES = ("alpha", "beta", "eta")


def build_qcqp2(inst: InnerInstance) -> QcqpModel:
    b = _Builder(2)
    s, tr = _translation_vars(b, inst)
    hyper = {}
    for i, j in inst.pairs():
        normal = [b.var(f"{_NORMAL_NAMES[c]}_{i + 1}_{j + 1}", "normal") for c in range(inst.dim)]
        offset = b.var(f"gamma_{i + 1}_{j + 1}", "offset")
        hyper[(i, j)] = (normal, offset)
    t = b.var("t", "homogenizer")
    _containment(b, inst, s, tr, t)
    for i, j in inst.pairs():
        normal, offset = hyper[(i, j)]
        b.add([(1, a, a) for a in normal], EQ, 1, f"unit_{i + 1}_{j + 1}")
        for side, k, rel in (("i", i, LE), ("j", j, GE)):
            for v, vert in enumerate(inst.shapes[k].vertices):
                # normal . (t_k + t * vert)  rel  t * offset
                terms = [(-1, offset, t)]
                for c in range(inst.dim):
                    terms += [(1, normal[c], tr[k][c]), (vert[c], normal[c], t)]
                b.add(terms, rel, 0, f"side_{i + 1}_{j + 1}_{side}{v + 1}")
    b.add([(1, t, t)], EQ, 1, "homogenize")
    return b.model({(s, t): Fraction(1)})


def build_qcqp3(inst: InnerInstance) -> QcqpModel:
    b = _Builder(3)
    s, tr = _translation_vars(b, inst)
    cert = {}
    for i, j in inst.pairs():
        cert[(i, j)] = [b.var(f"{_NORMAL_NAMES[c]}_{i + 1}_{j + 1}", "certificate") for c in range(inst.dim)]
    t = b.var("t", "homogenizer")
    _containment(b, inst, s, tr, t)
    for i, j in inst.pairs():
        mu = cert[(i, j)]
        for v, w in enumerate(difference_points(inst.shapes[i], inst.shapes[j])):
            # mu . (t * w - (t_j - t_i)) >= 1
            terms = []
            for c in range(inst.dim):
                terms += [(w[c], mu[c], t), (-1, mu[c], tr[j][c]), (1, mu[c], tr[i][c])]
            b.add(terms, GE, 1, f"farkas_{i + 1}_{j + 1}_{v + 1}")
    b.add([(1, t, t)], EQ, 1, "homogenize")
    return b.model({(s, t): Fraction(1)})


BUILDERS = {1: build_qcqp1, 2: build_qcqp2, 3: build_qcqp3}


# ---------------------------------------------------------------------------
# SDP relaxation


@dataclass
class SdpRelaxation:
    """``min <C, X>`` s.t. ``<A_i, X> rel_i b_i``, ``X`` PSD of order ``dim``.

    Matrices are sparse upper triangles ``{(a, b): value}`` (0-based,
    ``a <= b``) of symmetric matrices.
    """

    dim: int
    objective: dict
    constraints: list  # (matrix, rel, rhs, name)
    names: list


def _symmetric(coeffs: dict) -> dict:
    # w^T A w = sum coeff * w_a w_b  =>  A_ab = A_ba = coeff / 2 off the diagonal
    return {(a, b): (c if a == b else c / 2) for (a, b), c in coeffs.items()}


def relax_to_sdp(q: QcqpModel) -> SdpRelaxation:
    cons = []
    for con in q.constraints:
        if any(con.linear.values()):
            raise NonHomogeneousError(f"constraint {con.name} has linear terms")
        cons.append((_symmetric(con.coeffs), con.rel, con.rhs, con.name))
    return SdpRelaxation(len(q.variables), _symmetric(q.objective), cons, list(q.variables))


def full_matrix(sparse: dict, dim: int) -> list[list[Fraction]]:
    out = [[Fraction(0)] * dim for _ in range(dim)]
    for (a, b), v in sparse.items():
        out[a][b] = out[b][a] = Fraction(v)
    return out


def inner_product(sparse: dict, X) -> Fraction:
    """``<A, X>`` for a sparse upper triangle ``A`` and a full symmetric ``X``."""
    return sum((v if a == b else 2 * v) * X[a][b] for (a, b), v in sparse.items())


# ---------------------------------------------------------------------------
# SDPA sparse format


def _decimal17(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    with localcontext() as ctx:
        ctx.prec = 17
        d = Decimal(q.numerator) / Decimal(q.denominator)
    return format(d, "g")


def format_sdpa(r: SdpRelaxation) -> str:
    """SDPA sparse text.

    Block 1 is ``X``; inequalities get a diagonal slack block 2.  The program
    is written in SDPA's dual form ``max <F0, Y>`` with ``F0 = -C``, so an
    SDPA objective value is the negated relaxation value.  Non-integral
    entries are rounded to 17 significant digits; a leading ``* exact`` line
    carries each one as an exact fraction.
    """
    ineq = [k for k, (_, rel, _, _) in enumerate(r.constraints) if rel != EQ]
    slack = {k: pos + 1 for pos, k in enumerate(ineq)}
    entries = []  # (mat, block, i, j, Fraction)
    for (a, b), v in sorted(r.objective.items()):
        if v:
            entries.append((0, 1, a + 1, b + 1, -Fraction(v)))
    for k, (mat, rel, _, _) in enumerate(r.constraints):
        for (a, b), v in sorted(mat.items()):
            if v:
                entries.append((k + 1, 1, a + 1, b + 1, Fraction(v)))
        if k in slack:
            entries.append((k + 1, 2, slack[k], slack[k], Fraction(-1 if rel == GE else 1)))
    lines = ['"relaxation of the minimum container side; value = -(SDPA objective)']
    lines += [f"* variables {' '.join(r.names)}"]
    for mat, blk, i, j, v in entries:
        if v.denominator != 1:
            lines.append(f"* exact {mat} {blk} {i} {j} {v.numerator}/{v.denominator}")
    for k, (_, _, rhs, _) in enumerate(r.constraints):
        if rhs.denominator != 1:
            lines.append(f"* exact-rhs {k + 1} {rhs.numerator}/{rhs.denominator}")
    lines.append(f"{len(r.constraints)} = mDIM")
    nblock = 2 if ineq else 1
    lines.append(f"{nblock} = nBLOCK")
    lines.append(f"{r.dim}" + (f" {-len(ineq)}" if ineq else "") + " = bLOCKsTRUCT")
    lines.append(" ".join(_decimal17(rhs) for _, _, rhs, _ in r.constraints))
    for mat, blk, i, j, v in entries:
        lines.append(f"{mat} {blk} {i} {j} {_decimal17(v)}")
    return "\n".join(lines) + "\n"


def export_sdpa(r: SdpRelaxation, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_sdpa(r))


@dataclass
class SdpaData:
    mdim: int
    block_struct: list
    c: list
    entries: list  # (mat, block, i, j, value)
    exact: dict = field(default_factory=dict)

    def matrices(self, exact: bool = True) -> dict:
        """``{(mat, block): {(i, j): value}}`` with 1-based indices."""
        out: dict = {}
        for mat, blk, i, j, v in self.entries:
            if exact:
                v = self.exact.get((mat, blk, i, j), v)
            out.setdefault((mat, blk), {})[(i, j)] = v
        return out


def parse_sdpa(text: str) -> SdpaData:
    exact, exact_rhs = {}, {}
    body = []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s[0] in '"*':
            parts = s[1:].split()
            if parts[:1] == ["exact"]:
                exact[tuple(int(x) for x in parts[1:5])] = Fraction(parts[5])
            elif parts[:1] == ["exact-rhs"]:
                exact_rhs[int(parts[1])] = Fraction(parts[2])
            continue
        body.append(s.split("=")[0].strip() if "=" in s else s)
    mdim = int(body[0].split()[0])
    nblock = int(body[1].split()[0])
    block_struct = [int(x) for x in body[2].replace(",", " ").split()[:nblock]]
    c = [Fraction(x) for x in body[3].replace(",", " ").split()]
    for k, v in exact_rhs.items():
        c[k - 1] = v
    entries = []
    for row in body[4:]:
        mat, blk, i, j, v = row.split()
        entries.append((int(mat), int(blk), int(i), int(j), Fraction(v)))
    return SdpaData(mdim, block_struct, c, entries, exact)


def read_sdpa(path) -> SdpaData:
    with open(path, encoding="ascii") as fh:
        return parse_sdpa(fh.read())


# ---------------------------------------------------------------------------
# rank-one lifts


@dataclass
class Lift:
    """A point ``w`` of a QCQP, possibly with irrational scale factors.

    ``values[a]`` is rational; variable ``a`` really equals
    ``values[a] * sqrt(scale2[groups[a]])`` when it belongs to a group.  The
    unit-normal hyperplanes of ``qcqp2`` need this because an integer normal
    divided by its length is rarely rational.
    """

    values: list
    groups: list
    scale2: dict

    def objective(self, q: QcqpModel) -> Fraction:
        return _evaluate(q.objective, self)


def _sign_sqrt(r: Fraction, rho: Fraction, c: Fraction) -> int:
    """Sign of ``r * sqrt(rho) - c`` for rationals, ``rho >= 0``."""
    if r == 0 or rho == 0:
        return (0 > c) - (0 < c)
    if r > 0 and c <= 0:
        return 1
    if r < 0 and c >= 0:
        return -1
    lhs, rhs = r * r * rho, c * c
    if r > 0:  # both sides positive
        return (lhs > rhs) - (lhs < rhs)
    return (rhs > lhs) - (rhs < lhs)


def _terms(coeffs: dict, lift: Lift) -> dict:
    """Group the monomials by their irrational factor."""
    out: dict = {}
    for (a, b), c in coeffs.items():
        v = c * lift.values[a] * lift.values[b]
        ga, gb = lift.groups[a], lift.groups[b]
        if ga is not None and ga == gb:
            v *= lift.scale2[ga]
            key = ()
        else:
            key = tuple(sorted(g for g in (ga, gb) if g is not None))
        out[key] = out.get(key, 0) + v
    return {k: v for k, v in out.items() if v}


def _evaluate(coeffs: dict, lift: Lift) -> Fraction:
    terms = _terms(coeffs, lift)
    if any(terms.keys() - {()}):
        raise ValueError("objective depends on scaled variables")
    return Fraction(terms.get((), 0))


def constraint_holds(con: QuadConstraint, lift: Lift) -> bool:
    """Exact check of ``w^T A w rel rhs`` for a rank-one lift."""
    terms = _terms(con.coeffs, lift)
    q = Fraction(terms.pop((), 0))
    if not terms:
        sign = (q > con.rhs) - (q < con.rhs)
    elif len(terms) == 1:
        (key, r), = terms.items()
        rho = Fraction(1)
        for g in key:
            rho *= lift.scale2[g]
        sign = _sign_sqrt(Fraction(r), rho, con.rhs - q)
    else:
        raise ValueError(f"constraint {con.name} mixes several irrational factors")
    return {EQ: sign == 0, LE: sign <= 0, GE: sign >= 0}[con.rel]


def lift_matrix(lift: Lift) -> list[list[Fraction]]:
    """``w w^T`` when every entry is rational."""
    if any(g is not None for g in lift.groups):
        raise ValueError("lift has irrational entries")
    w = lift.values
    return [[a * b for b in w] for a in w]


def _base_values(q: QcqpModel, inst: InnerInstance, placement: Placement) -> list:
    values = [Fraction(0)] * len(q.variables)
    values[q.index("s")] = Fraction(placement.s)
    coords = "xyw"[: inst.dim]
    for i, tvec in enumerate(placement.translations):
        for c, name in enumerate(coords):
            values[q.index(f"{name}_{i + 1}")] = Fraction(tvec[c])
    values[q.t] = Fraction(1)
    return values


def lift_qcqp1(q: QcqpModel, inst: InnerInstance, placement: Placement) -> Lift:
    values = _base_values(q, inst, placement)
    for (i, j), f in placement_assignment(inst, placement).items():
        values[q.index(f"z_{i + 1}_{j + 1}_{f + 1}")] = Fraction(1)
    return Lift(values, [None] * len(values), {})


def lift_qcqp2(q: QcqpModel, inst: InnerInstance, placement: Placement) -> Lift:
    """Separating hyperplanes taken from the facet each pair touches."""
    values = _base_values(q, inst, placement)
    groups = [None] * len(values)
    scale2 = {}
    for g, ((i, j), f) in enumerate(placement_assignment(inst, placement).items()):
        facet = minkowski_difference(inst.shapes[i], inst.shapes[j]).facets[f]
        ti = placement.translations[i]
        top = max(sum(a * b for a, b in zip(facet.normal, v)) for v in inst.shapes[i].vertices)
        offset = sum(a * Fraction(b) for a, b in zip(facet.normal, ti)) + top
        scale2[g] = Fraction(1, sum(a * a for a in facet.normal))
        for c in range(inst.dim):
            k = q.index(f"{_NORMAL_NAMES[c]}_{i + 1}_{j + 1}")
            values[k], groups[k] = Fraction(facet.normal[c]), g
        k = q.index(f"gamma_{i + 1}_{j + 1}")
        values[k], groups[k] = offset, g
    return Lift(values, groups, scale2)


def strictly_separated_placement(inst: InnerInstance, assignment: dict, margin) -> Optional[Placement]:
    """Optimal placement when every assigned facet row must hold with slack ``margin``."""
    margin = Fraction(margin)
    rows = [(coeffs, rel, Fraction(rhs) + margin) for coeffs, rel, rhs in assignment_rows(inst, assignment)]
    out = solve_lp(base_lp(InnerInstance(inst.shapes, symmetry_type=0)).extended(rows))
    if out.status is not LpStatus.OPTIMAL:
        return None
    from .inner import placement_from_point

    return placement_from_point(inst, out.point)


def lift_qcqp3(q: QcqpModel, inst: InnerInstance, placement: Placement, assignment: Optional[dict] = None) -> Lift:
    """Farkas certificates ``-normal / (normal . d - rhs)``.

    They exist only when every difference vector is strictly outside its
    region, so ``placement`` has to be strictly separated (see
    :func:`strictly_separated_placement`).
    """
    values = _base_values(q, inst, placement)
    assignment = assignment or placement_assignment(inst, placement)
    for (i, j), f in assignment.items():
        facet = minkowski_difference(inst.shapes[i], inst.shapes[j]).facets[f]
        d = [Fraction(b) - a for a, b in zip(placement.translations[i], placement.translations[j])]
        gap = facet.value(d) - facet.rhs
        if gap <= 0:
            raise ValueError(f"pair {(i, j)} touches its facet; no Farkas certificate exists")
        for c in range(inst.dim):
            values[q.index(f"{_NORMAL_NAMES[c]}_{i + 1}_{j + 1}")] = Fraction(-facet.normal[c]) / gap
    return Lift(values, [None] * len(values), {})


def violated(q: QcqpModel, lift: Lift) -> list[str]:
    return [con.name for con in q.constraints if not constraint_holds(con, lift)]


def sdp_violations(r: SdpRelaxation, X) -> list[str]:
    """Names of SDP constraints a full matrix ``X`` violates (exact)."""
    bad = []
    for mat, rel, rhs, name in r.constraints:
        v = inner_product(mat, X)
        ok = {EQ: v == rhs, LE: v <= rhs, GE: v >= rhs}[rel]
        if not ok:
            bad.append(name)
    return bad


# ---------------------------------------------------------------------------
# external results


def parse_solver_log(text: str) -> list[float]:
    """Every ``value=<float>`` occurrence in a solver log."""
    out = []
    for line in text.splitlines():
        for tok in line.replace(",", " ").split():
            if tok.startswith("value="):
                out.append(float(tok[len("value="):]))
    return out


def compare_values(exact: Fraction, values: Sequence[float], tol: float = 1e-6) -> list[dict]:
    """Gap of every external value to the exact optimum.

    A sound relaxation value must not exceed the optimum; ``tol`` absorbs the
    solver's floating-point accuracy (relative to ``max(1, |exact|)``).
    """
    e = float(exact)
    slack = tol * max(1.0, abs(e))
    return [{"external": v, "exact": e, "gap": e - v, "sound": v <= e + slack} for v in values]
