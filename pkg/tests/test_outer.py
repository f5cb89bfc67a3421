from fractions import Fraction

import pytest

from simplexpack.geometry import enumerate_shapelist
from simplexpack.outer import (
    BLOCKING,
    LOWER_BOUND,
    OPTIMAL,
    BoundsDatabase,
    InvalidConfigurationError,
    OuterConfig,
    ParseError,
    SearchNode,
    check_census,
    derive_submultisets,
    extend_node,
    grid_bound,
    is_submultiset,
    known_bound,
    solve_outer,
    submultisets,
)


def test_known_and_grid_bounds():
    assert known_bound(2, 5) == Fraction(5, 2)
    assert known_bound(3, 3) == 2
    assert known_bound(2, 99) is None
    assert [grid_bound(2, k) for k in (1, 2, 4, 5, 9, 10)] == [1, 2, 2, 3, 3, 4]
    assert grid_bound(3, 9) == 3


def test_submultisets():
    assert is_submultiset((1, 1), (0, 1, 1))
    assert not is_submultiset((1, 1), (0, 1, 2))
    subs = sorted(submultisets((0, 1, 1)))
    assert subs == [(0,), (0, 1), (0, 1, 1), (1,), (1, 1)]


def test_children_are_generated_once():
    size = 4
    level = [SearchNode((i,)) for i in range(size)]
    for _ in range(2):
        level = [c for node in level for c in extend_node(node, size)]
    keys = [n.multiset for n in level]
    assert len(keys) == len(set(keys)) == 20  # multisets of size 3 from 4 items
    assert all(list(k) == sorted(k) for k in keys)


def test_database_semantics(tmp_path):
    path = tmp_path / "bounds.db"
    db = BoundsDatabase(str(path))
    db.put(2, (0, 1), LOWER_BOUND, Fraction(3, 2))
    db.put(2, (0, 1), LOWER_BOUND, Fraction(1))  # weaker bound ignored
    assert db.get(2, (0, 1)).value == Fraction(3, 2)
    db.put(2, (0, 1), OPTIMAL, 2)
    db.put(2, (0, 1), LOWER_BOUND, 5)  # optimal records are final
    assert db.get(2, (0, 1)).status == OPTIMAL and db.get(2, (0, 1)).value == 2
    db.add_blocking(2, (1, 1), Fraction(7, 2))
    assert db.is_blocked(2, (0, 1, 1, 3))
    assert not db.is_blocked(2, (0, 1, 3))
    assert not db.is_blocked(3, (1, 1))
    # stale blockers (value not above the current bound) do not fathom
    assert db.is_blocked(2, (1, 1, 2), bound=3)
    assert not db.is_blocked(2, (1, 1, 2), bound=Fraction(7, 2))

    again = BoundsDatabase(str(path))  # appended log replays to the same state
    assert again == db
    db.save()
    lines = path.read_text().splitlines()
    assert lines == ["2;2;0,1;optimal;2/1", "2;2;1,1;blocking;7/2"]
    assert BoundsDatabase(str(path)) == db


def test_database_parse_errors(tmp_path):
    bad = tmp_path / "bad.db"
    bad.write_text("2;2;0,1;optimal;2/1\n2;3;0,1;optimal;2/1\n")
    with pytest.raises(ParseError, match="line 2"):
        BoundsDatabase(str(bad))
    for line in ("2;2;1,0;optimal;2", "2;2;0,1;maybe;2", "2;2;0,1;optimal", "2;x;0;optimal;1"):
        with pytest.raises(ParseError):
            BoundsDatabase.parse_line(line)
    assert BoundsDatabase.parse_line("3;1;5;" + BLOCKING + ";7/3") == (3, (5,), BLOCKING, Fraction(7, 3))


def test_small_runs():
    r = solve_outer(1, 2)
    assert r.value == 1 and len(r.census) == 1 and check_census(r)
    r = solve_outer(4, 2)
    assert r.value == 2 and len(r.census) == 4 and check_census(r)


def test_run_without_known_bound_uses_grid_bound():
    r = solve_outer(2, 2, initial_bound=None, config=OuterConfig())
    assert r.value == 2
    # a bound that is too small leaves the census empty
    r = solve_outer(2, 2, initial_bound=Fraction(3, 2))
    assert r.census == [] and r.value == Fraction(3, 2)


def test_queue_orders_and_workers_agree():
    base = solve_outer(3, 2)
    best = solve_outer(3, 2, config=OuterConfig(order="best"))
    pool = solve_outer(3, 2, config=OuterConfig(workers=2, batch_size=8))
    sym0 = solve_outer(3, 2, config=OuterConfig(symmetry_type=0))
    keys = [e.multiset for e in base.census]
    for r in (best, pool, sym0):
        assert r.value == base.value
        assert [e.multiset for e in r.census] == keys


def test_shared_database_reuses_records():
    db = BoundsDatabase()
    first = solve_outer(4, 2, db=db)
    second = solve_outer(4, 2, db=db)
    assert [e.multiset for e in first.census] == [e.multiset for e in second.census]
    assert second.inner_calls <= first.inner_calls


def test_invalid_configuration():
    with pytest.raises(InvalidConfigurationError):
        solve_outer(0, 2)
    with pytest.raises(InvalidConfigurationError):
        solve_outer(2, 2, config=OuterConfig(workers=0))
    with pytest.raises(InvalidConfigurationError):
        solve_outer(2, 2, config=OuterConfig(order="lifo"))
    with pytest.raises(InvalidConfigurationError):
        solve_outer(2, 2, initial_bound=Fraction(1, 2))


def test_report_json():
    r = solve_outer(2, 2)
    doc = r.to_json()
    assert doc["value"] == "2/1" and doc["census_size"] == len(r.census)
    census = r.census_json()
    assert census["shapes"] == [str(s) for s in enumerate_shapelist(2, 2)]
    assert all(e["placement"]["s"] == "2/1" for e in census["census"])


def test_derive_statistics():
    stats = derive_submultisets([(0, 0, 1), (0, 1, 2)], against=[(0, 0), (0, 1), (3, 3)])
    assert stats.with_duplicates == 5
    assert stats.distinct == [(0, 0), (0, 1), (0, 2), (1, 2)]
    assert stats.matched == 2 and stats.nonextendable == 1
    assert stats.row() == (5, 4, 3, 1)
    assert derive_submultisets([], against=[]).row() == (0, 0, 0, 0)
