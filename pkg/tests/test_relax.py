import random
from fractions import Fraction

import pytest

from simplexpack.geometry import enumerate_shapelist, standard_simplex
from simplexpack.inner import InnerInstance, placement_assignment, solve_inner
from simplexpack.ratlp import EQ, GE
from simplexpack import relax

STD2 = standard_simplex(2)
STD3 = standard_simplex(3)
TWO = InnerInstance([STD2, STD2])


def test_variable_counts_for_two_triangles():
    q1, q2, q3 = (relax.BUILDERS[k](TWO) for k in (1, 2, 3))
    assert len(q1.variables) == 12
    assert q2.variables == ["s", "x_1", "y_1", "x_2", "y_2", "alpha_1_2", "beta_1_2", "gamma_1_2", "t"]
    assert q3.variables == ["s", "x_1", "y_1", "x_2", "y_2", "alpha_1_2", "beta_1_2", "t"]
    assert q1.roles["z_1_2_6"] == "indicator" and q1.roles["t"] == "homogenizer"


def test_single_shape_has_only_containment_rows():
    for k in (1, 2, 3):
        q = relax.BUILDERS[k](InnerInstance([STD2]))
        names = [c.name for c in q.constraints]
        assert names == ["contain_1_1", "contain_1_2", "contain_1_3", "homogenize"]


def rows_per_pair(q, prefix):
    return sum(1 for c in q.constraints if c.name.startswith(prefix))


def test_constraint_census_per_pair():
    q1 = relax.build_qcqp1(TWO)
    assert rows_per_pair(q1, "cover_") == 1
    assert rows_per_pair(q1, "sep_") == rows_per_pair(q1, "binary_") == 6
    q2 = relax.build_qcqp2(TWO)
    assert rows_per_pair(q2, "unit_") == 1 and rows_per_pair(q2, "side_") == 6
    assert rows_per_pair(relax.build_qcqp3(TWO), "farkas_") == 9
    q3 = relax.build_qcqp3(InnerInstance([STD3, STD3]))
    assert rows_per_pair(q3, "farkas_") == 16
    assert rows_per_pair(relax.build_qcqp2(InnerInstance([STD3, STD3])), "side_") == 8
    for k in (1, 2, 3):
        q = relax.BUILDERS[k](InnerInstance([STD2] * 3))
        assert sum(1 for c in q.constraints if c.name == "homogenize") == 1


def test_every_term_is_quadratic_and_matrices_symmetric():
    for k in (1, 2, 3):
        q = relax.BUILDERS[k](InnerInstance([STD2, STD2, STD2]))
        for con in q.constraints:
            assert not con.linear
            A = con.matrix(len(q.variables))
            assert all(A[a][b] == A[b][a] for a in range(len(A)) for b in range(len(A)))
        C = q.objective_matrix()
        s, t = q.index("s"), q.t
        assert C[s][t] == C[t][s] == Fraction(1, 2)


def test_relaxation_dimension_and_homogenizing_row():
    r = relax.relax_to_sdp(relax.build_qcqp1(TWO))
    assert r.dim == 12
    mat, rel, rhs, name = r.constraints[-1]
    assert name == "homogenize" and mat == {(11, 11): 1} and rel == EQ and rhs == 1


def test_linear_terms_are_rejected():
    q = relax.build_qcqp2(TWO)
    q.constraints[0].linear = {0: Fraction(1)}
    with pytest.raises(relax.NonHomogeneousError):
        relax.relax_to_sdp(q)


def test_sdpa_round_trip(tmp_path):
    for k in (1, 2, 3):
        r = relax.relax_to_sdp(relax.BUILDERS[k](InnerInstance([STD2, STD2, STD2])))
        path = tmp_path / f"q{k}.dat-s"
        relax.export_sdpa(r, path)
        text = path.read_text()
        assert text == relax.format_sdpa(r)  # deterministic
        data = relax.read_sdpa(path)
        nineq = sum(1 for _, rel, _, _ in r.constraints if rel != EQ)
        assert data.mdim == len(r.constraints)
        assert data.block_struct == [r.dim, -nineq]
        assert data.c == [rhs for _, _, rhs, _ in r.constraints]
        mats = data.matrices()
        assert {(a - 1, b - 1): -v for (a, b), v in mats[(0, 1)].items()} == {k_: v for k_, v in r.objective.items()}
        for idx, (mat, rel, _, _) in enumerate(r.constraints, 1):
            assert {(a - 1, b - 1): v for (a, b), v in mats.get((idx, 1), {}).items()} == mat
            if rel != EQ:
                (slack,) = mats[(idx, 2)].values()
                assert slack == (-1 if rel == GE else 1)
        # without the exact sidecar the rounded values are still within 1e-16 relative
        for (key, mat) in data.matrices(exact=False).items():
            for ij, v in mat.items():
                exact = mats[key][ij]
                assert abs(v - exact) <= abs(exact) * Fraction(1, 10 ** 16)


def test_homogenizing_row_is_one_diagonal_entry():
    r = relax.relax_to_sdp(relax.build_qcqp1(TWO))
    lines = relax.format_sdpa(r).splitlines()
    m = len(r.constraints)
    entries = [ln for ln in lines if ln.startswith(f"{m} ") and "=" not in ln]
    assert entries == [f"{m} 1 12 12 1"]


def test_sign_of_scaled_square_roots():
    s = relax._sign_sqrt
    assert s(Fraction(1), Fraction(2), Fraction(1)) == 1  # sqrt 2 > 1
    assert s(Fraction(1), Fraction(2), Fraction(3, 2)) == -1
    assert s(Fraction(-1), Fraction(4), Fraction(-2)) == 0
    assert s(Fraction(0), Fraction(3), Fraction(0)) == 0
    assert s(Fraction(-1), Fraction(2), Fraction(-1)) == -1


def lifts(inst):
    res = solve_inner(inst)
    out = {}
    q1 = relax.build_qcqp1(inst)
    out[1] = (q1, relax.lift_qcqp1(q1, inst, res.placement))
    q2 = relax.build_qcqp2(inst)
    out[2] = (q2, relax.lift_qcqp2(q2, inst, res.placement))
    q3 = relax.build_qcqp3(inst)
    assignment = placement_assignment(inst, res.placement)
    strict = relax.strictly_separated_placement(inst, assignment, Fraction(1, 1000))
    out[3] = (q3, relax.lift_qcqp3(q3, inst, strict, assignment))
    return res.value, out


@pytest.mark.parametrize("shapes", [[STD2, STD2], [STD2] * 3, [STD3, STD3]])
def test_rank_one_lifts_are_feasible(shapes):
    inst = InnerInstance(shapes)
    value, out = lifts(inst)
    for k, (q, lift) in out.items():
        assert relax.violated(q, lift) == []
        if k == 3:
            assert lift.objective(q) >= value
        else:
            assert lift.objective(q) == value
        if k != 2:
            r = relax.relax_to_sdp(q)
            assert relax.sdp_violations(r, relax.lift_matrix(lift)) == []


def test_farkas_lift_needs_strict_separation():
    inst = InnerInstance([STD2, STD2])
    res = solve_inner(inst)
    q = relax.build_qcqp3(inst)
    with pytest.raises(ValueError):
        relax.lift_qcqp3(q, inst, res.placement)
    a = placement_assignment(inst, res.placement)
    v1 = relax.strictly_separated_placement(inst, a, Fraction(1, 10)).s
    v2 = relax.strictly_separated_placement(inst, a, Fraction(1, 1000)).s
    assert res.value < v2 < v1


def test_compare_values():
    rows = relax.compare_values(Fraction(2), [1.5, 2.0000000001, 2.1])
    assert [r["sound"] for r in rows] == [True, True, False]
    assert relax.parse_solver_log("it 1 value=1.5\nfoo\nvalue=2, gap 0\n") == [1.5, 2.0]
