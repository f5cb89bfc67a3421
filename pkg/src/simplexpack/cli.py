"""Command-line interface.

Exit codes: 0 success, 2 invalid configuration, 3 infeasible or empty
result, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import relax, render
from .geometry import (InvalidShapeError, Placement, SimplexShape, enumerate_shapelist, format_shapelist,
                       parse_shape_line, parse_shapelist, verify_packing)
from .inner import (InnerInstance, InnerStatus, InvalidInstanceError, build_bigm_milp, export_lp_file,
                    solve_inner)
from .outer import (KNOWN_BOUNDS, BoundsDatabase, InvalidConfigurationError, OuterConfig, ParseError,
                    check_census, derive_submultisets, grid_bound, solve_outer)

EXIT_OK, EXIT_CONFIG, EXIT_EMPTY, EXIT_IO = 0, 2, 3, 4
DB_ENV = "SIMPLEXPACK_DB"

log = logging.getLogger("simplexpack")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class Config:
    dim: int
    k: int
    bounds: dict = field(default_factory=dict)  # k -> upper bound on the container side
    symmetry_type: int = 2
    workers: int = 1
    db_path: Optional[str] = None
    out_dir: str = "."

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise CliError(f"dimension must be 2 or 3, got {self.dim}", EXIT_CONFIG)
        if self.k < 1:
            raise CliError("k must be positive", EXIT_CONFIG)
        if self.workers < 1:
            raise CliError("worker count must be at least 1", EXIT_CONFIG)
        if any(Fraction(v) <= 0 for v in self.bounds.values()):
            raise CliError("bounds must be positive", EXIT_CONFIG)
        if not self.bounds:
            self.bounds = {i + 1: v for i, v in enumerate(KNOWN_BOUNDS.get(self.dim, []))}

    def bound(self) -> Fraction:
        return Fraction(self.bounds.get(self.k) or grid_bound(self.dim, self.k))


def frac(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def frac_str(q) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO)


def _write(path, text: str) -> None:
    try:
        p = Path(path)
        if p.parent != Path("."):
            p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}", EXIT_IO)


def _load_json(path) -> dict:
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})", EXIT_IO)


def _db(path: Optional[str]) -> BoundsDatabase:
    path = path or os.environ.get(DB_ENV)
    db = BoundsDatabase()
    if path:
        if Path(path).exists():
            try:
                db.load(path)
            except ParseError as exc:
                raise CliError(str(exc), EXIT_IO)
            except OSError as exc:
                raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO)
        db.path = path
    return db


# ---------------------------------------------------------------------------
# commands


def cmd_shapelist(args) -> int:
    shapes = enumerate_shapelist(args.dim, args.sbar)
    text = format_shapelist(shapes, args.dim, args.sbar)
    if not args.header:
        text = "".join(line + "\n" for line in text.splitlines() if not line.startswith("#"))
    sys.stdout.write(text)
    return EXIT_OK if shapes else EXIT_EMPTY


def placement_document(shapes, placement: Placement, **extra) -> dict:
    doc = {"dim": shapes[0].dim, "shapes": [str(s) for s in shapes], "placement": placement.to_json()}
    doc.update(extra)
    return doc


def cmd_pack(args) -> int:
    bounds = {args.k: args.bound} if args.bound is not None else {}
    cfg = Config(args.dim, args.k, bounds, args.sym, args.workers, args.db, args.out)
    db = _db(cfg.db_path)
    try:
        report = solve_outer(cfg.k, cfg.dim, cfg.bound(), OuterConfig(cfg.symmetry_type, cfg.workers, args.order), db)
    except InvalidConfigurationError as exc:
        raise CliError(str(exc), EXIT_CONFIG)
    if db.path:
        try:
            db.save()
        except OSError as exc:
            raise CliError(f"cannot write {db.path}: {exc.strerror}", EXIT_IO)
    out = Path(cfg.out_dir)
    stem = f"{cfg.dim}d_k{cfg.k}"
    _write(out / f"report_{stem}.json", json.dumps(report.to_json(), indent=2) + "\n")
    _write(out / f"census_{stem}.json", json.dumps(report.census_json(), indent=1) + "\n")
    if not report.census:
        print(f"no packing found with side <= {frac_str(cfg.bound())}", file=sys.stderr)
        return EXIT_EMPTY
    if not check_census(report):
        log.warning("a census placement failed exact verification")
    limit = len(report.census) if args.max_figures is None else args.max_figures
    for idx, entry in enumerate(report.census[:limit]):
        shapes = [report.shapelist[i] for i in entry.multiset]
        _write(out / "figures" / f"{stem}_{idx + 1:05d}.svg", render.svg(shapes, entry.placement))
    print(frac_str(report.value))
    print(f"census {len(report.census)}  inner calls {report.inner_calls}  "
          f"wall {report.wall_time:.1f}s", file=sys.stderr)
    return EXIT_OK


def _shapes_file(path) -> list[SimplexShape]:
    try:
        shapes = parse_shapelist(_read(path))
    except (InvalidShapeError, ValueError, IndexError) as exc:
        raise CliError(f"{path}: {exc}", EXIT_CONFIG)
    if not shapes:
        raise CliError(f"{path}: no shapes", EXIT_CONFIG)
    return shapes


def cmd_inner(args) -> int:
    shapes = _shapes_file(args.shapes)
    if args.dim is not None and any(s.dim != args.dim for s in shapes):
        raise CliError("shape dimension does not match --dim", EXIT_CONFIG)
    try:
        inst = InnerInstance(shapes, cutoff=args.cutoff, symmetry_type=args.sym)
    except InvalidInstanceError as exc:
        raise CliError(str(exc), EXIT_CONFIG)
    if args.export_sdpa:
        r = relax.relax_to_sdp(relax.BUILDERS[args.export_sdpa](inst))
        path = args.out or f"qcqp{args.export_sdpa}.dat-s"
        try:
            relax.export_sdpa(r, path)
        except OSError as exc:
            raise CliError(f"cannot write {path}: {exc.strerror}", EXIT_IO)
        print(f"wrote {path} (dimension {r.dim}, {len(r.constraints)} constraints)")
        return EXIT_OK
    if args.export_lp:
        shat = args.cutoff
        if shat is None:
            res = solve_inner(inst)
            shat = res.value
        model = build_bigm_milp(inst, shat, with_symmetry=args.with_symmetry)
        path = args.out or "bigm.lp"
        try:
            export_lp_file(model, path)
        except OSError as exc:
            raise CliError(f"cannot write {path}: {exc.strerror}", EXIT_IO)
        print(f"wrote {path} (shat {frac_str(shat)})")
        return EXIT_OK
    res = solve_inner(inst)
    if res.status is not InnerStatus.OPTIMAL:
        print(f"no packing with side <= {frac_str(args.cutoff)}; lower bound {frac_str(res.value)}")
        return EXIT_EMPTY
    print(frac_str(res.value))
    doc = placement_document(inst.shapes, res.placement, value=frac_str(res.value))
    if args.out:
        _write(args.out, json.dumps(doc, indent=1) + "\n")
    else:
        print(json.dumps(doc["placement"]))
    return EXIT_OK


def _census_keys(doc: dict) -> list[tuple[str, ...]]:
    names = doc.get("shapes", [])
    return [tuple(sorted(names[i] for i in e["multiset"])) for e in doc.get("census", [])]


def cmd_derive(args) -> int:
    census = _census_keys(_load_json(args.census))
    against = _census_keys(_load_json(args.against)) if args.against else None
    # compare by shape strings, so the two files may use different shapelists
    names = sorted({s for ms in census + (against or []) for s in ms})
    index = {s: i for i, s in enumerate(names)}
    key = lambda ms: tuple(sorted(index[s] for s in ms))
    stats = derive_submultisets([key(ms) for ms in census], [key(ms) for ms in against] if against is not None else None)
    print(" ".join(str(x) for x in stats.row()))
    return EXIT_OK


def _placement_input(path, entry: Optional[int]):
    doc = _load_json(path)
    try:
        if "census" in doc:
            census = doc["census"]
            if not census:
                raise CliError(f"{path}: empty census", EXIT_EMPTY)
            e = census[(entry or 1) - 1]
            shapes = [parse_shape_line(f"{doc['dim']};{doc['shapes'][i]}") for i in e["multiset"]]
            return shapes, Placement.from_json(e["placement"])
        shapes = [parse_shape_line(f"{doc['dim']};{s}") for s in doc["shapes"]]
        return shapes, Placement.from_json(doc["placement"])
    except (KeyError, IndexError, ValueError, InvalidShapeError) as exc:
        raise CliError(f"{path}: malformed placement ({exc})", EXIT_CONFIG)


def cmd_render(args) -> int:
    shapes, placement = _placement_input(args.placement, args.entry)
    if not verify_packing(shapes, placement):
        log.warning("placement fails exact verification (overlap or containment)")
    _write(args.out, render.svg(shapes, placement))
    if args.tikz:
        _write(args.tikz, render.tikz(shapes, placement))
    if shapes[0].dim == 3:
        _write(Path(args.out).with_suffix(".json"), json.dumps(placement_document(shapes, placement), indent=1) + "\n")
    return EXIT_OK


def cmd_compare(args) -> int:
    if args.exact is not None:
        exact = args.exact
    elif args.shapes:
        res = solve_inner(InnerInstance(_shapes_file(args.shapes)))
        exact = res.value
    else:
        raise CliError("give --exact or --shapes", EXIT_CONFIG)
    values = relax.parse_solver_log(_read(args.log))
    if not values:
        print("no value= lines found", file=sys.stderr)
        return EXIT_EMPTY
    print(f"exact {frac_str(exact)} ({float(exact):.6f})")
    for row in relax.compare_values(exact, values, args.tol):
        flag = "ok" if row["sound"] else "ABOVE EXACT"
        print(f"external {row['external']:.6f}  gap {row['gap']:+.3e}  {flag}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simplexpack", description="Exact packing of unimodular simplices.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("shapelist", help="print all unimodular shapes fitting a container")
    q.add_argument("--dim", type=int, choices=(2, 3), required=True)
    q.add_argument("--sbar", type=frac, required=True)
    q.add_argument("--header", action="store_true", help="include the '# dim=...' comment line")
    q.set_defaults(func=cmd_shapelist)

    q = sub.add_parser("pack", help="minimum container side and census of optimal multisets")
    q.add_argument("--dim", type=int, choices=(2, 3), required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--bound", type=frac, help="initial upper bound (default: known value or grid bound)")
    q.add_argument("--db", help=f"bounds database file (default: ${DB_ENV})")
    q.add_argument("--workers", type=int, default=1)
    q.add_argument("--sym", type=int, choices=(0, 1, 2), default=2)
    q.add_argument("--order", choices=("fifo", "best"), default="fifo")
    q.add_argument("--out", default=".", help="output directory")
    q.add_argument("--max-figures", type=int, help="render at most this many census entries")
    q.set_defaults(func=cmd_pack)

    q = sub.add_parser("inner", help="solve or export one multiset")
    q.add_argument("--dim", type=int, choices=(2, 3))
    q.add_argument("--shapes", required=True, help="shapelist-format file")
    q.add_argument("--cutoff", type=frac)
    q.add_argument("--sym", type=int, choices=(0, 1, 2), default=2)
    q.add_argument("--export-lp", action="store_true", help="write the Big-M model in LP format")
    q.add_argument("--with-symmetry", action="store_true", help="include symmetry rows in the LP export")
    q.add_argument("--export-sdpa", type=int, choices=(1, 2, 3), help="write the SDP relaxation of QCQP 1, 2 or 3")
    q.add_argument("--out", help="output file (placement JSON, LP or SDPA)")
    q.set_defaults(func=cmd_inner)

    q = sub.add_parser("derive", help="derive (k-1)-multisets from a k census")
    q.add_argument("--census", required=True)
    q.add_argument("--against")
    q.set_defaults(func=cmd_derive)

    q = sub.add_parser("render", help="draw a placement")
    q.add_argument("--placement", required=True, help="placement JSON or census JSON")
    q.add_argument("--entry", type=int, help="census entry (1-based) when given a census file")
    q.add_argument("--out", required=True)
    q.add_argument("--tikz", help="also write a standalone TikZ document")
    q.set_defaults(func=cmd_render)

    q = sub.add_parser("compare", help="compare external SDP values with the exact optimum")
    q.add_argument("--log", required=True)
    q.add_argument("--exact", type=frac)
    q.add_argument("--shapes")
    q.add_argument("--tol", type=float, default=1e-6, help="accepted excess over the exact value")
    q.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
