from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from simplexpack.geometry import (
    DegenerateHullError,
    InvalidShapeError,
    Placement,
    SimplexShape,
    canonicalize,
    containment_constants,
    convex_hull,
    difference_points,
    enclosing_side,
    enumerate_shapelist,
    format_shapelist,
    minkowski_difference,
    parse_shape_line,
    parse_shapelist,
    shape_from_vertices,
    standard_simplex,
    verify_packing,
)

STD2 = standard_simplex(2)
STD3 = standard_simplex(3)
SL2 = enumerate_shapelist(2, 2)
SL3 = enumerate_shapelist(3, 2)


def test_standard_simplex_vertices():
    assert STD2.vertices == ((0, 0), (1, 0), (0, 1))
    assert STD3.dim == 3 and len(STD3.vertices) == 4
    assert str(STD2) == "1,0;0,1"


def test_non_unimodular_shape_rejected():
    with pytest.raises(InvalidShapeError):
        SimplexShape(((2, 0), (0, 1)))
    with pytest.raises(InvalidShapeError):
        SimplexShape(((1, 0), (1, 0)))


def test_canonical_form_of_standard_simplex_is_itself():
    assert canonicalize(STD2) == STD2
    assert canonicalize(STD3) == STD3


@given(st.sampled_from(SL2 + SL3), st.data())
def test_canonical_form_ignores_translation_and_vertex_order(shape, data):
    n = shape.dim
    shift = data.draw(st.lists(st.integers(-5, 5), min_size=n, max_size=n))
    verts = [tuple(a + b for a, b in zip(v, shift)) for v in shape.vertices]
    verts = data.draw(st.permutations(verts))
    assert shape_from_vertices(verts) == shape


def test_shapelist_is_canonical_and_fits():
    for sl, sbar in ((SL2, 2), (SL3, 2), (enumerate_shapelist(2, 4), 4)):
        assert len(set(sl)) == len(sl)
        for shape in sl:
            assert canonicalize(shape) == shape
            assert enclosing_side(shape) <= sbar


def test_shapelists_are_prefix_stable():
    big = enumerate_shapelist(2, 4)
    for sbar in (1, 2, 3):
        small = enumerate_shapelist(2, sbar)
        assert big[: len(small)] == small


def test_shapelist_below_one_is_empty():
    assert enumerate_shapelist(2, Fraction(1, 2)) == []


def test_fractional_sbar_rounds_down():
    assert enumerate_shapelist(2, Fraction(5, 2)) == SL2


def test_enclosing_side_and_constants():
    assert enclosing_side(STD2) == 1
    cc = containment_constants(STD2)
    assert cc.lower == (0, 0) and cc.sum_bound == -1
    # raw columns (0,1), (-1,1): the vertex (-1,1) forces x >= 1
    raw = SimplexShape(((0, 1), (-1, 1)))
    assert containment_constants(raw).lower == (1, 0)
    # its canonical form has vertices 0, (1,0), (1,-1) and needs y >= 1 instead
    t4 = canonicalize(raw)
    assert t4.columns == ((1, 0), (1, -1))
    assert enclosing_side(t4) == enclosing_side(raw) == 2
    cc = containment_constants(t4)
    assert cc.lower == (0, 1) and cc.sum_bound == -1


def test_minkowski_difference_facet_counts():
    assert len(minkowski_difference(STD2, STD2).facets) == 6
    assert len(minkowski_difference(STD3, STD3).facets) == 14


def test_minkowski_depth_signs():
    region = minkowski_difference(STD2, STD2)
    assert region.depth((0, 0)) > 0  # identical positions overlap
    assert region.depth((1, 0)) == 0  # touching along an edge
    assert region.depth((3, 3)) < 0


def test_hull_contains_all_points_and_facets_are_tight():
    for si in SL2[:4]:
        for sj in SL2[:4]:
            pts = difference_points(si, sj)
            for f in minkowski_difference(si, sj).facets:
                assert max(f.value(p) for p in pts) == f.rhs


def test_degenerate_hull_rejected():
    with pytest.raises(DegenerateHullError):
        convex_hull([(0, 0), (1, 1), (2, 2)], 2)
    with pytest.raises(DegenerateHullError):
        convex_hull([(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)], 3)


def test_four_triangle_packing_at_side_two_verifies():
    t4 = SimplexShape(((0, 1), (-1, 1)))
    shapes = [STD2, STD2, STD2, t4]
    pl = Placement(Fraction(2), ((1, 0), (0, 1), (0, 0), (1, 0)))
    assert verify_packing(shapes, pl)
    assert not verify_packing(shapes, Placement(Fraction(3, 2), pl.translations))
    overlapping = Placement(Fraction(2), ((0, 0), (0, 1), (0, 0), (1, 0)))
    assert not verify_packing(shapes, overlapping)
    # the same packing with the canonical shape, translated to its base vertex
    assert verify_packing([STD2, STD2, STD2, canonicalize(t4)],
                          Placement(Fraction(2), ((1, 0), (0, 1), (0, 0), (0, 1))))


def test_placement_json_round_trip():
    pl = Placement(Fraction(5, 2), ((Fraction(1, 2), 0), (0, Fraction(3, 2))))
    doc = pl.to_json()
    assert doc["s"] == "5/2"
    assert Placement.from_json(doc) == Placement(Fraction(5, 2), ((Fraction(1, 2), Fraction(0)), (Fraction(0), Fraction(3, 2))))


def test_shapelist_file_round_trip():
    text = format_shapelist(SL3, 3, 2)
    assert text.splitlines()[0].startswith("#")
    assert parse_shapelist(text) == SL3
    with pytest.raises(InvalidShapeError):
        parse_shape_line("2;1,0")


@settings(max_examples=30)
@given(st.sampled_from(SL2), st.sampled_from(SL2))
def test_difference_region_is_antisymmetric(si, sj):
    # T_i - T_j is the negative of T_j - T_i
    a = {(f.normal, f.rhs) for f in minkowski_difference(si, sj).facets}
    b = {(tuple(-c for c in f.normal), f.rhs) for f in minkowski_difference(sj, si).facets}
    assert a == b


def test_self_difference_is_centrally_symmetric():
    for shape in SL2 + SL3:
        facets = {(f.normal, f.rhs) for f in minkowski_difference(shape, shape).facets}
        assert facets == {(tuple(-c for c in nrm), rhs) for nrm, rhs in facets}
