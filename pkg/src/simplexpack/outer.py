"""Branch-and-bound over shape multisets.

Nodes are multisets of shapelist indices; a node on level ``l`` holds ``l``
shapes and its children append one index that is not smaller than the last
one, so every multiset is generated exactly once.  Every node is checked
against known bounds and blocking multisets before the inner solver runs.
Leaves whose optimum equals the global bound form the census of optimal
multisets.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import os
import time
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .geometry import Placement, SimplexShape, enumerate_shapelist, verify_packing
from .inner import InnerInstance, InnerResult, InnerStatus, solve_inner

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
LOWER_BOUND = "lower-bound"
BLOCKING = "blocking"

# reciprocals of the known simplex packing widths (k = 1..20 in 2D), used as
# starting upper bounds; 13 and above are the best known packings
KNOWN_BOUNDS = {
    2: [Fraction(x) for x in ("1", "2", "2", "2", "5/2", "17/6", "3", "3", "3", "10/3",
                              "7/2", "56/15", "23/6", "79/20", "4", "4", "17/4", "13/3",
                              "9/2", "97/21")],
    3: [Fraction(1)] + [Fraction(2)] * 7,
}


class InvalidConfigurationError(ValueError):
    pass


def known_bound(n: int, k: int) -> Optional[Fraction]:
    table = KNOWN_BOUNDS.get(n, [])
    return table[k - 1] if 1 <= k <= len(table) else None


def grid_bound(n: int, k: int) -> Fraction:
    """Smallest integer side ``B`` with ``B**n >= k``.

    The simplex of integer side ``B`` splits into ``B**n`` unimodular
    simplices, so ``k`` shapes always fit.
    """
    b = 1
    while b ** n < k:
        b += 1
    return Fraction(b)


# ---------------------------------------------------------------------------
# multisets


Key = tuple  # non-decreasing tuple of shapelist indices


def is_submultiset(small: Key, big: Key) -> bool:
    need = Counter(small)
    have = Counter(big)
    return all(have[x] >= c for x, c in need.items())


def submultisets(ms: Key) -> Iterable[Key]:
    """All non-empty sub-multisets of ``ms`` (including ``ms``), as sorted tuples."""
    counts = sorted(Counter(ms).items())
    for choice in itertools.product(*[range(c + 1) for _, c in counts]):
        sub = tuple(x for (x, _), c in zip(counts, choice) for _ in range(c))
        if sub:
            yield sub


@dataclass
class SearchNode:
    multiset: Key
    lower: Fraction = Fraction(0)

    @property
    def level(self) -> int:
        return len(self.multiset)


def extend_node(node: SearchNode, shapelist_size: int) -> list[SearchNode]:
    """Children append one index ``>=`` the last one and inherit the node's value as lower bound."""
    start = node.multiset[-1] if node.multiset else 0
    return [SearchNode(node.multiset + (j,), node.lower) for j in range(start, shapelist_size)]


# ---------------------------------------------------------------------------
# bounds database


@dataclass
class BoundRecord:
    status: str
    value: Fraction


class ParseError(ValueError):
    pass


class BoundsDatabase:
    """Known optima and lower bounds of multisets, plus the blocking list.

    Keys are ``(dim, multiset)``.  With a ``path`` every new record is
    appended to the file as it is made; :meth:`save` rewrites the file in
    compact form.
    """

    def __init__(self, path=None):
        self.path = path
        self.records: dict[tuple, BoundRecord] = {}
        self.blocking: dict[tuple, Fraction] = {}
        self._blocking_by_dim: dict[int, set] = {}
        if path is not None and os.path.exists(path):
            self.load(path)

    # -- records
    def get(self, n: int, ms: Key) -> Optional[BoundRecord]:
        return self.records.get((n, tuple(ms)))

    def put(self, n: int, ms: Key, status: str, value) -> None:
        value = Fraction(value)
        key = (n, tuple(ms))
        old = self.records.get(key)
        if old is not None:
            if old.status == OPTIMAL:
                return
            if status == LOWER_BOUND and old.value >= value:
                return
        self.records[key] = BoundRecord(status, value)
        self._append(n, ms, status, value)

    def add_blocking(self, n: int, ms: Key, value) -> None:
        key = (n, tuple(ms))
        value = Fraction(value)
        if key in self.blocking and self.blocking[key] >= value:
            return
        self.blocking[key] = value
        self._blocking_by_dim.setdefault(n, set()).add(tuple(ms))
        self._append(n, ms, BLOCKING, value)

    def is_blocked(self, n: int, ms: Key, bound=None) -> bool:
        """True iff a blocking multiset (with value above ``bound``, if given) is contained in ``ms``."""
        blockers = self._blocking_by_dim.get(n)
        if not blockers:
            return False

        def live(b):
            return bound is None or self.blocking[(n, b)] > bound

        ncand = 1
        for c in Counter(ms).values():
            ncand *= c + 1
        if ncand <= len(blockers):
            return any(sub in blockers and live(sub) for sub in submultisets(tuple(ms)))
        return any(live(b) and is_submultiset(b, ms) for b in blockers)

    # -- file format: n;k;i,j,...;status;p/q
    @staticmethod
    def format_line(n: int, ms: Key, status: str, value: Fraction) -> str:
        return f"{n};{len(ms)};{','.join(str(i) for i in ms)};{status};{value.numerator}/{value.denominator}"

    def _append(self, n, ms, status, value):
        if self.path is not None:
            with open(self.path, "a", encoding="ascii") as fh:
                fh.write(self.format_line(n, ms, status, value) + "\n")

    def lines(self) -> list[str]:
        out = [self.format_line(n, ms, r.status, r.value) for (n, ms), r in sorted(self.records.items())]
        out += [self.format_line(n, ms, BLOCKING, v) for (n, ms), v in sorted(self.blocking.items())]
        return out

    def save(self, path=None) -> None:
        path = path or self.path
        if path is None:
            raise ValueError("no database path")
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="ascii") as fh:
            fh.write("\n".join(self.lines()) + ("\n" if self.records or self.blocking else ""))
        os.replace(tmp, path)

    def load(self, path) -> None:
        saved, self.path = self.path, None  # do not re-append while loading
        try:
            with open(path, encoding="ascii") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.strip()
                    if not line or line.startswith("#"):
                        continue
                    n, ms, status, value = self.parse_line(line, lineno)
                    if status == BLOCKING:
                        self.add_blocking(n, ms, value)
                    else:
                        self.put(n, ms, status, value)
        finally:
            self.path = saved

    @staticmethod
    def parse_line(line: str, lineno: int = 0):
        parts = line.split(";")
        try:
            if len(parts) != 5:
                raise ValueError("expected 5 fields")
            n, k = int(parts[0]), int(parts[1])
            ms = tuple(int(x) for x in parts[2].split(",")) if parts[2] else ()
            status = parts[3]
            value = Fraction(parts[4])
            if status not in (OPTIMAL, LOWER_BOUND, BLOCKING):
                raise ValueError(f"unknown status {status!r}")
            if len(ms) != k or list(ms) != sorted(ms):
                raise ValueError("multiset does not match its cardinality or is unsorted")
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}: {line!r}") from None
        return n, ms, status, value

    def __eq__(self, other):
        return (isinstance(other, BoundsDatabase) and self.records == other.records
                and self.blocking == other.blocking)


# ---------------------------------------------------------------------------
# run


@dataclass
class OuterConfig:
    symmetry_type: int = 2
    workers: int = 1
    order: str = "fifo"  # or "best": smallest known lower bound first
    batch_size: int = 64


@dataclass
class CensusEntry:
    multiset: Key
    placement: Placement

    def to_json(self) -> dict:
        return {"multiset": list(self.multiset), "placement": self.placement.to_json()}


@dataclass
class RunReport:
    k: int
    dim: int
    value: Fraction
    census: list
    shapelist: list
    inner_calls: int = 0
    inner_time_total: float = 0.0
    inner_time_max: float = 0.0
    nodes: int = 0
    fathomed: int = 0
    wall_time: float = 0.0

    @property
    def inner_time_avg(self) -> float:
        return self.inner_time_total / self.inner_calls if self.inner_calls else 0.0

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "dim": self.dim,
            "value": f"{self.value.numerator}/{self.value.denominator}",
            "census_size": len(self.census),
            "inner_calls": self.inner_calls,
            "inner_time_avg": self.inner_time_avg,
            "inner_time_max": self.inner_time_max,
            "inner_time_total": self.inner_time_total,
            "nodes": self.nodes,
            "fathomed": self.fathomed,
            "wall_time": self.wall_time,
        }

    def census_json(self) -> dict:
        return {
            "k": self.k,
            "dim": self.dim,
            "value": f"{self.value.numerator}/{self.value.denominator}",
            "shapes": [str(s) for s in self.shapelist],
            "census": [e.to_json() for e in self.census],
        }


def _solve_job(args):
    shapes, cutoff, sym, lower = args
    return solve_inner(InnerInstance(shapes, cutoff=cutoff, symmetry_type=sym, lower_bound=lower))


class _Queue:
    def __init__(self, order: str):
        if order not in ("fifo", "best"):
            raise InvalidConfigurationError(f"unknown queue order {order!r}")
        self.order = order
        self._fifo: deque = deque()
        self._heap: list = []
        self._count = itertools.count()

    def push(self, node: SearchNode):
        if self.order == "fifo":
            self._fifo.append(node)
        else:
            heapq.heappush(self._heap, (node.lower, -node.level, next(self._count), node))

    def pop(self) -> SearchNode:
        return self._fifo.popleft() if self.order == "fifo" else heapq.heappop(self._heap)[-1]

    def __len__(self):
        return len(self._fifo) + len(self._heap)


def solve_outer(k: int, n: int, initial_bound=None, config: Optional[OuterConfig] = None,
                db: Optional[BoundsDatabase] = None) -> RunReport:
    """Minimum container side for ``k`` shapes and every multiset attaining it.

    ``initial_bound`` defaults to the known value for ``(n, k)`` when there is
    one and to :func:`grid_bound` otherwise; it must be a valid upper bound
    (the census is empty otherwise).
    """
    if k < 1:
        raise InvalidConfigurationError("k must be positive")
    config = config or OuterConfig()
    if config.workers < 1:
        raise InvalidConfigurationError("worker count must be at least 1")
    db = db if db is not None else BoundsDatabase()
    if initial_bound is None:
        initial_bound = known_bound(n, k) or grid_bound(n, k)
    bound = Fraction(initial_bound)
    if bound <= 0:
        raise InvalidConfigurationError("bound must be positive")
    shapes = enumerate_shapelist(n, bound)
    if not shapes:
        raise InvalidConfigurationError(f"no shape fits in side {bound}")

    start = time.perf_counter()
    report = RunReport(k, n, bound, [], shapes)
    census: dict[Key, Placement] = {}
    queue = _Queue(config.order)
    for i in range(len(shapes)):
        queue.push(SearchNode((i,)))

    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    batch = config.batch_size if pool else 1

    def block(ms, value):
        db.add_blocking(n, ms, value)
        report.fathomed += 1

    def accept(node: SearchNode, value: Fraction, placement: Optional[Placement]):
        nonlocal bound, census
        if node.level == k:
            if value < bound:
                log.info("k=%d: bound improved %s -> %s", k, bound, value)
                bound = value
                census = {}
            census[node.multiset] = placement
        else:
            for child in extend_node(SearchNode(node.multiset, value), len(shapes)):
                queue.push(child)

    try:
        while queue:
            # collect a batch of nodes that need the inner solver
            work = []
            while queue and len(work) < batch:
                node = queue.pop()
                report.nodes += 1
                if node.lower > bound or db.is_blocked(n, node.multiset, bound):
                    report.fathomed += 1
                    continue
                rec = db.get(n, node.multiset)
                lower = node.lower
                if rec is not None:
                    if rec.value > bound:
                        block(node.multiset, rec.value)
                        continue
                    if rec.status == OPTIMAL and node.level < k:
                        accept(node, rec.value, None)
                        continue
                    lower = max(lower, rec.value)
                work.append((node, lower))
            if not work:
                continue
            jobs = [(tuple(shapes[i] for i in node.multiset), bound, config.symmetry_type, lower)
                    for node, lower in work]
            results: list[InnerResult] = list(pool.map(_solve_job, jobs)) if pool else [_solve_job(j) for j in jobs]
            for (node, _), res in zip(work, results):
                report.inner_calls += 1
                report.inner_time_total += res.stats.seconds
                report.inner_time_max = max(report.inner_time_max, res.stats.seconds)
                if res.status is InnerStatus.OPTIMAL:
                    db.put(n, node.multiset, OPTIMAL, res.value)
                else:
                    db.put(n, node.multiset, LOWER_BOUND, res.value)
                if res.value > bound:
                    block(node.multiset, res.value)
                    continue
                # multiset indices are sorted, matching the instance's shape order
                accept(node, res.value, res.placement)
    finally:
        if pool:
            pool.shutdown()

    report.value = bound
    report.census = [CensusEntry(ms, census[ms]) for ms in sorted(census)]
    report.wall_time = time.perf_counter() - start
    return report


def census_shapes(report: RunReport, entry: CensusEntry) -> list[SimplexShape]:
    return [report.shapelist[i] for i in entry.multiset]


def check_census(report: RunReport) -> bool:
    """Every census placement packs its multiset exactly at the reported value."""
    return all(
        e.placement.s == report.value and verify_packing(census_shapes(report, e), e.placement)
        for e in report.census)


# ---------------------------------------------------------------------------
# derivation k -> k-1


@dataclass
class DeriveStats:
    with_duplicates: int
    distinct: list
    optimal: int = 0  # size of the (k-1) census compared against
    matched: int = 0
    nonextendable: int = 0

    def row(self) -> tuple[int, int, int, int]:
        return (self.with_duplicates, len(self.distinct), self.optimal, self.nonextendable)


def derive_submultisets(census: Sequence[Key], against: Optional[Sequence[Key]] = None) -> DeriveStats:
    """Remove one copy of each distinct shape from every census multiset.

    ``against`` is the optimal ``(k-1)`` census; members that are not derived
    from any ``k`` multiset are counted as nonextendable.
    """
    derived = []
    for ms in census:
        for x in sorted(set(ms)):
            sub = list(ms)
            sub.remove(x)
            derived.append(tuple(sub))
    distinct = sorted(set(derived))
    stats = DeriveStats(len(derived), distinct)
    if against is not None:
        target = {tuple(sorted(m)) for m in against}
        ds = set(distinct)
        stats.optimal = len(target)
        stats.matched = len(target & ds)
        stats.nonextendable = len(target - ds)
    return stats
