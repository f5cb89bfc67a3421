"""Exact rational linear programming.

Dense tableau simplex over Python integers.  Each tableau row is kept as a
list of ints together with a positive row denominator, so pivots cost a
handful of integer multiplications plus one ``gcd`` per row instead of a
``Fraction`` normalisation per entry.  Pivoting follows Bland's rule
throughout.

``solve_lp`` runs the textbook two-phase primal method.  ``Tableau.add_row``
re-optimises an optimal tableau after appending one constraint; the old
basis stays dual feasible, so a few dual pivots (again with Bland's rule)
restore optimality.  Branch-and-bound children use that path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import gcd
from typing import Optional, Sequence

LE, GE, EQ = "<=", ">=", "="


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class LinearProgram:
    """``min objective . x`` subject to ``rows``; variables are free unless a row bounds them."""

    objective: list
    rows: list = field(default_factory=list)
    names: Optional[list] = None

    def __post_init__(self):
        self.objective = [Fraction(c) for c in self.objective]
        self.rows = [self._row(r) for r in self.rows]
        if self.names is None:
            self.names = [f"v{j}" for j in range(self.num_vars)]

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    def _row(self, row):
        coeffs, rel, rhs = row
        if rel not in (LE, GE, EQ):
            raise ValueError(f"unknown relation {rel!r}")
        coeffs = [Fraction(c) for c in coeffs]
        if len(coeffs) != self.num_vars:
            raise ValueError(f"row has {len(coeffs)} coefficients, expected {self.num_vars}")
        return (coeffs, rel, Fraction(rhs))

    def add_row(self, coeffs, rel, rhs):
        self.rows.append(self._row((coeffs, rel, rhs)))

    def extended(self, extra_rows) -> "LinearProgram":
        return LinearProgram(list(self.objective), list(self.rows) + list(extra_rows), list(self.names))


@dataclass
class LpOutcome:
    status: LpStatus
    value: Optional[Fraction] = None
    point: Optional[list] = None


# ---------------------------------------------------------------------------
# integer-row tableau


def _scale_to_int(values: Sequence[Fraction]) -> tuple[list[int], int]:
    den = 1
    for v in values:
        den = den * v.denominator // gcd(den, v.denominator)
    return [int(v * den) for v in values], den


def _normalize(row: list[int], den: int) -> tuple[list[int], int]:
    g = gcd(den, *row)
    if g > 1:
        return [x // g for x in row], den // g
    return row, den


class Tableau:
    """Simplex tableau in integer-row form.

    ``rows[i][0]`` is the right-hand side and ``rows[i][j + 1]`` the entry of
    column ``j``; the actual values are those integers divided by
    ``dens[i]``.  ``obj`` holds the reduced costs in the same layout with
    ``-value`` at index 0.
    """

    __slots__ = ("rows", "dens", "basis", "obj", "objden", "ncols", "pivots")

    def __init__(self, rows, dens, basis, obj, objden, ncols):
        self.rows = rows
        self.dens = dens
        self.basis = basis
        self.obj = obj
        self.objden = objden
        self.ncols = ncols
        self.pivots = 0

    def copy(self) -> "Tableau":
        t = Tableau([r[:] for r in self.rows], self.dens[:], self.basis[:],
                    self.obj[:], self.objden, self.ncols)
        return t

    @property
    def value(self) -> Fraction:
        return Fraction(-self.obj[0], self.objden)

    def column_values(self) -> list[Fraction]:
        vals = [Fraction(0)] * self.ncols
        for row, den, b in zip(self.rows, self.dens, self.basis):
            vals[b] = Fraction(row[0], den)
        return vals

    def pivot(self, r: int, e: int) -> None:
        col = e + 1
        prow = self.rows[r]
        p = prow[col]
        if p < 0:
            prow = [-x for x in prow]
            p = -p
        prow, p = _normalize(prow, p)
        self.rows[r] = prow
        self.dens[r] = p
        rows, dens = self.rows, self.dens
        for i in range(len(rows)):
            if i == r:
                continue
            row = rows[i]
            a = row[col]
            if a:
                rows[i], dens[i] = _normalize([x * p - a * y for x, y in zip(row, prow)], dens[i] * p)
        a = self.obj[col]
        if a:
            self.obj, self.objden = _normalize(
                [x * p - a * y for x, y in zip(self.obj, prow)], self.objden * p)
        self.basis[r] = e
        self.pivots += 1

    def primal_simplex(self, allowed: Optional[int] = None) -> LpStatus:
        """Bland's-rule primal simplex from a feasible basis.

        Only the first ``allowed`` columns may enter.
        """
        limit = self.ncols if allowed is None else allowed
        while True:
            obj = self.obj
            e = -1
            for j in range(limit):
                if obj[j + 1] < 0:
                    e = j
                    break
            if e < 0:
                return LpStatus.OPTIMAL
            col = e + 1
            best = -1
            bnum = bden = 0
            for i, row in enumerate(self.rows):
                a = row[col]
                if a > 0:
                    num = row[0]
                    if best < 0:
                        best, bnum, bden = i, num, a
                        continue
                    lhs, rhs = num * bden, bnum * a
                    if lhs < rhs or (lhs == rhs and self.basis[i] < self.basis[best]):
                        best, bnum, bden = i, num, a
            if best < 0:
                return LpStatus.UNBOUNDED
            self.pivot(best, e)

    def dual_simplex(self, cutoff: Optional[Fraction] = None) -> LpStatus:
        """Bland's-rule dual simplex from a dual feasible basis.

        Returns ``None`` instead of a status when ``cutoff`` is given and the
        objective provably exceeds it.
        """
        while True:
            r = -1
            for i, row in enumerate(self.rows):
                if row[0] < 0 and (r < 0 or self.basis[i] < self.basis[r]):
                    r = i
            if r < 0:
                return LpStatus.OPTIMAL
            if cutoff is not None and self.value > cutoff:
                return None
            row = self.rows[r]
            obj = self.obj
            e = -1
            bnum = bden = 0
            for j in range(self.ncols):
                a = row[j + 1]
                if a < 0:
                    num = obj[j + 1]
                    # ratio d_j / |a_rj|; both share the row/objective denominators
                    if e < 0 or num * -bden < bnum * -a:
                        e, bnum, bden = j, num, a
            if e < 0:
                return LpStatus.INFEASIBLE
            self.pivot(r, e)

    def append_column(self) -> int:
        for row in self.rows:
            row.append(0)
        self.obj.append(0)
        self.ncols += 1
        return self.ncols - 1

    def add_constraint(self, coeffs: Sequence[Fraction], rel: str, rhs: Fraction) -> None:
        """Append ``coeffs . cols rel rhs`` (over tableau columns) with a new basic slack.

        The tableau stays dual feasible; the new row may be primal infeasible.
        """
        if rel == EQ:
            self.add_constraint(coeffs, LE, rhs)
            self.add_constraint(coeffs, GE, rhs)
            return
        sign = 1 if rel == LE else -1
        # slack row: sign * (coeffs . x) + slack = sign * rhs
        vals = [Fraction(sign) * rhs] + [Fraction(sign) * Fraction(c) for c in coeffs]
        vals += [Fraction(0)] * (self.ncols - len(coeffs))
        row, den = _scale_to_int(vals)
        slack = self.append_column()
        row.append(den)
        for i, b in enumerate(self.basis):
            a = row[b + 1]
            if a:
                brow, bden = self.rows[i], self.dens[i]
                # actual row/den - (a/den) * brow/bden ; basic entry of brow is bden
                row = [x * brow[b + 1] - a * y for x, y in zip(row, brow)]
                den = den * brow[b + 1]
                row, den = _normalize(row, den)
        self.rows.append(row)
        self.dens.append(den)
        self.basis.append(slack)


# ---------------------------------------------------------------------------
# standard form


@dataclass
class _StandardForm:
    """Map between original variables and nonnegative tableau columns."""

    shift: list  # Fraction lower bound per original var, or None if split
    columns: list  # per original var: (plus_col, minus_col or None)
    ncols: int

    def transform(self, coeffs, rhs):
        cols = [Fraction(0)] * self.ncols
        rhs = Fraction(rhs)
        for j, c in enumerate(coeffs):
            if not c:
                continue
            plus, minus = self.columns[j]
            cols[plus] += c
            if minus is not None:
                cols[minus] -= c
            else:
                rhs -= c * self.shift[j]
        return cols, rhs

    def recover(self, colvals) -> list[Fraction]:
        point = []
        for j, (plus, minus) in enumerate(self.columns):
            if minus is None:
                point.append(self.shift[j] + colvals[plus])
            else:
                point.append(colvals[plus] - colvals[minus])
        return point


def _lower_bound_rows(lp: LinearProgram):
    """Single-variable rows that only bound a variable from below."""
    bounds: dict[int, Fraction] = {}
    used = set()
    for k, (coeffs, rel, rhs) in enumerate(lp.rows):
        nz = [j for j, c in enumerate(coeffs) if c]
        if len(nz) != 1 or rel == EQ:
            continue
        j = nz[0]
        c = coeffs[j]
        if (c > 0 and rel == GE) or (c < 0 and rel == LE):
            b = rhs / c
            if j not in bounds or b > bounds[j]:
                bounds[j] = b
            used.add(k)
    return bounds, used


def _standard_form(lp: LinearProgram):
    bounds, used = _lower_bound_rows(lp)
    shift, columns = [], []
    ncols = 0
    for j in range(lp.num_vars):
        if j in bounds:
            shift.append(bounds[j])
            columns.append((ncols, None))
            ncols += 1
        else:
            shift.append(None)
            columns.append((ncols, ncols + 1))
            ncols += 2
    sf = _StandardForm(shift, columns, ncols)
    rows = [sf.transform(coeffs, rhs) + (rel,)
            for k, (coeffs, rel, rhs) in enumerate(lp.rows) if k not in used]
    return sf, rows


class _Solved:
    """An optimal tableau bound to the standard form that produced it."""

    def __init__(self, sf: _StandardForm, tab: Tableau, offset: Fraction, nstruct: int):
        self.sf = sf
        self.tab = tab
        self.offset = offset  # objective constant from the variable shifts
        self.nstruct = nstruct

    def outcome(self) -> LpOutcome:
        vals = self.tab.column_values()[: self.nstruct]
        point = self.sf.recover(vals)
        return LpOutcome(LpStatus.OPTIMAL, self.tab.value + self.offset, point)


def _build(lp: LinearProgram):
    """Two-phase primal simplex; returns a status and, if optimal, a ``_Solved``."""
    sf, rows = _standard_form(lp)
    n = sf.ncols
    cost, offset = sf.transform(lp.objective, Fraction(0))
    offset = -offset  # transform moved the shift constant to the rhs side

    # one slack per inequality, then artificials where no slack can start basic
    m = len(rows)
    nslack = sum(1 for _, _, rel in rows if rel != EQ)
    total = n + nslack
    int_rows, dens, basis, art_rows = [], [], [], []
    k = n
    for coeffs, rhs, rel in rows:
        vals = [rhs] + list(coeffs) + [Fraction(0)] * nslack
        slack_col = None
        if rel != EQ:
            vals[k + 1] = Fraction(1 if rel == LE else -1)
            slack_col = k
            k += 1
        if rhs < 0:
            vals = [-v for v in vals]
        row, den = _scale_to_int(vals)
        int_rows.append(row)
        dens.append(den)
        if slack_col is not None and row[slack_col + 1] > 0:
            basis.append(slack_col)
        else:
            basis.append(None)
            art_rows.append(len(int_rows) - 1)
    nart = len(art_rows)
    for row in int_rows:
        row.extend([0] * nart)
    for a, i in enumerate(art_rows):
        int_rows[i][total + a + 1] = dens[i]
        basis[i] = total + a
    ncols = total + nart

    tab = Tableau(int_rows, dens, basis, [0] * (ncols + 1), 1, ncols)
    if nart:
        # phase 1: minimise the sum of artificials
        obj = [Fraction(0)] * (ncols + 1)
        for a in range(nart):
            obj[total + a + 1] = Fraction(1)
        for i in art_rows:
            for j, x in enumerate(int_rows[i]):
                obj[j] -= Fraction(x, dens[i])
        tab.obj, tab.objden = _scale_to_int(obj)
        tab.primal_simplex()
        if tab.value > 0:
            return LpStatus.INFEASIBLE, None
        # drive zero-level artificials out of the basis, dropping redundant rows
        i = 0
        while i < len(tab.rows):
            if tab.basis[i] >= total:
                row = tab.rows[i]
                e = next((j for j in range(total) if row[j + 1]), None)
                if e is None:
                    del tab.rows[i], tab.dens[i], tab.basis[i]
                    continue
                tab.pivot(i, e)
            i += 1
        tab.rows = [r[: total + 1] for r in tab.rows]
        tab.ncols = total
    # phase 2 objective in reduced form
    obj = [Fraction(0)] + list(cost) + [Fraction(0)] * (tab.ncols - n)
    for row, den, b in zip(tab.rows, tab.dens, tab.basis):
        cb = obj[b + 1]
        if cb:
            for j, x in enumerate(row):
                obj[j] -= cb * Fraction(x, den)
    tab.obj, tab.objden = _scale_to_int(obj)
    status = tab.primal_simplex()
    if status is not LpStatus.OPTIMAL:
        return status, None
    return status, _Solved(sf, tab, offset, n)


def solve_lp(lp: LinearProgram) -> LpOutcome:
    """Solve ``lp`` exactly.

    Optimality is certified by the final reduced costs being nonnegative;
    the returned point satisfies every row exactly.
    """
    status, solved = _build(lp)
    if solved is None:
        return LpOutcome(status)
    return solved.outcome()


def solve_lp_incremental(base: LinearProgram, extra_rows) -> LpOutcome:
    """Solve ``base`` plus ``extra_rows``, re-using the optimal basis of ``base``.

    Same status and value as ``solve_lp(base.extended(extra_rows))``.  When
    ``base`` is not optimal the extended program is solved from scratch.
    """
    extra_rows = [base._row(r) for r in extra_rows]
    status, solved = _build(base)
    if solved is None:
        return solve_lp(base.extended(extra_rows))
    tab = solved.tab
    for coeffs, rel, rhs in extra_rows:
        cols, crhs = solved.sf.transform(coeffs, rhs)
        tab.add_constraint(cols, rel, crhs)
    status = tab.dual_simplex()
    if status is not LpStatus.OPTIMAL:
        return LpOutcome(status)
    return solved.outcome()


class IncrementalLP:
    """An optimal LP that children extend one row at a time.

    Used by the branch-and-bound: ``child`` copies the tableau, appends the
    rows and re-optimises with dual pivots.
    """

    def __init__(self, solved: _Solved):
        self._solved = solved

    @classmethod
    def solve(cls, lp: LinearProgram) -> tuple[LpStatus, Optional["IncrementalLP"]]:
        status, solved = _build(lp)
        return status, (cls(solved) if solved is not None else None)

    @property
    def value(self) -> Fraction:
        return self._solved.tab.value + self._solved.offset

    def point(self) -> list[Fraction]:
        return self._solved.outcome().point

    def child(self, rows, cutoff: Optional[Fraction] = None):
        """Re-optimise with extra rows.

        Returns ``(status, IncrementalLP | None)``.  When the dual objective
        passes ``cutoff`` before optimality is reached the result is
        ``(None, bound)`` with ``bound > cutoff`` a valid lower bound.
        """
        s = self._solved
        tab = s.tab.copy()
        for coeffs, rel, rhs in rows:
            cols, crhs = s.sf.transform(coeffs, rhs)
            tab.add_constraint(cols, rel, crhs)
        dual_cut = None if cutoff is None else cutoff - s.offset
        status = tab.dual_simplex(dual_cut)
        if status is None:
            return None, tab.value + s.offset
        if status is not LpStatus.OPTIMAL:
            return status, None
        return status, IncrementalLP(_Solved(s.sf, tab, s.offset, s.nstruct))
