from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from simplexpack.ratlp import (
    EQ,
    GE,
    LE,
    IncrementalLP,
    LinearProgram,
    LpStatus,
    solve_lp,
    solve_lp_incremental,
)

scipy_optimize = pytest.importorskip("scipy.optimize")


def feasible(lp, point):
    for coeffs, rel, rhs in lp.rows:
        v = sum(c * x for c, x in zip(coeffs, point))
        if not {LE: v <= rhs, GE: v >= rhs, EQ: v == rhs}[rel]:
            return False
    return True


def test_small_lp_optimum_is_exact():
    # min -x - y  s.t.  x + 2y <= 4, 3x + y <= 6, x, y >= 0
    lp = LinearProgram([-1, -1], [([1, 2], LE, 4), ([3, 1], LE, 6), ([1, 0], GE, 0), ([0, 1], GE, 0)])
    out = solve_lp(lp)
    assert out.status is LpStatus.OPTIMAL
    assert out.value == Fraction(-14, 5)
    assert out.point == [Fraction(8, 5), Fraction(6, 5)]


def test_free_variables_and_equalities():
    # min x - y  s.t.  x + y = 1, x - y >= -3 (x, y free)
    lp = LinearProgram([1, -1], [([1, 1], EQ, 1), ([1, -1], GE, -3)])
    out = solve_lp(lp)
    assert out.status is LpStatus.OPTIMAL and out.value == -3


def test_infeasible_and_unbounded():
    assert solve_lp(LinearProgram([1], [([1], GE, 2), ([1], LE, 1)])).status is LpStatus.INFEASIBLE
    assert solve_lp(LinearProgram([-1], [([1], GE, 0)])).status is LpStatus.UNBOUNDED


def test_bad_row_rejected():
    with pytest.raises(ValueError):
        LinearProgram([1, 2], [([1], LE, 0)])
    with pytest.raises(ValueError):
        LinearProgram([1], [([1], "<", 0)])


coef = st.integers(-4, 4)


@st.composite
def boxed_lps(draw, nvars=3, max_rows=4):
    """Random LPs inside a box, so they are never unbounded."""
    obj = draw(st.lists(coef, min_size=nvars, max_size=nvars))
    rows = []
    for j in range(nvars):
        e = [0] * nvars
        e[j] = 1
        rows.append((e, GE, draw(st.integers(-3, 0))))
        rows.append((e, LE, draw(st.integers(1, 4))))
    for _ in range(draw(st.integers(0, max_rows))):
        rows.append((draw(st.lists(coef, min_size=nvars, max_size=nvars)), draw(st.sampled_from([LE, GE, EQ])),
                     draw(st.integers(-5, 5))))
    return LinearProgram(obj, rows)


def extra_rows(nvars=3):
    return st.lists(st.tuples(st.lists(coef, min_size=nvars, max_size=nvars), st.sampled_from([LE, GE]),
                              st.integers(-4, 4)), min_size=1, max_size=3)


@settings(max_examples=60, deadline=None)
@given(boxed_lps())
def test_solver_is_deterministic_and_certified(lp):
    a, b = solve_lp(lp), solve_lp(lp)
    assert a == b
    if a.status is LpStatus.OPTIMAL:
        assert feasible(lp, a.point)
        assert sum(c * x for c, x in zip(lp.objective, a.point)) == a.value


@settings(max_examples=60, deadline=None)
@given(boxed_lps(), extra_rows())
def test_adding_rows_never_lowers_the_optimum(lp, rows):
    base = solve_lp(lp)
    more = solve_lp(lp.extended(rows))
    if base.status is LpStatus.INFEASIBLE:
        assert more.status is LpStatus.INFEASIBLE
    elif more.status is LpStatus.OPTIMAL:
        assert more.value >= base.value


@settings(max_examples=60, deadline=None)
@given(boxed_lps(), extra_rows())
def test_warm_start_matches_cold_solve(lp, rows):
    cold = solve_lp(lp.extended(rows))
    warm = solve_lp_incremental(lp, rows)
    assert warm.status is cold.status
    assert warm.value == cold.value
    if warm.status is LpStatus.OPTIMAL:
        assert feasible(lp.extended(rows), warm.point)


@settings(max_examples=40, deadline=None)
@given(boxed_lps(), extra_rows())
def test_incremental_children_and_cutoff(lp, rows):
    status, root = IncrementalLP.solve(lp)
    if status is not LpStatus.OPTIMAL:
        return
    cold = solve_lp(lp.extended(rows))
    st_child, child = root.child(rows)
    assert st_child is cold.status
    if cold.status is LpStatus.OPTIMAL:
        assert child.value == cold.value
        # a cutoff below the optimum stops early with a bound above the cutoff
        cut = cold.value - 1
        res = root.child(rows, cutoff=cut)
        if res[0] is None:
            assert cut < res[1] <= cold.value
        else:
            assert res[1].value == cold.value


@settings(max_examples=60, deadline=None)
@given(boxed_lps())
def test_agrees_with_floating_point_reference(lp):
    out = solve_lp(lp)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for coeffs, rel, rhs in lp.rows:
        c = [float(x) for x in coeffs]
        if rel == LE:
            A_ub.append(c); b_ub.append(float(rhs))
        elif rel == GE:
            A_ub.append([-x for x in c]); b_ub.append(-float(rhs))
        else:
            A_eq.append(c); b_eq.append(float(rhs))
    ref = scipy_optimize.linprog([float(c) for c in lp.objective], A_ub=A_ub or None, b_ub=b_ub or None,
                                 A_eq=A_eq or None, b_eq=b_eq or None, bounds=[(None, None)] * lp.num_vars,
                                 method="highs")
    if ref.status == 0:
        assert out.status is LpStatus.OPTIMAL
        assert abs(float(out.value) - ref.fun) < 1e-7
    elif ref.status == 2:
        assert out.status is LpStatus.INFEASIBLE
