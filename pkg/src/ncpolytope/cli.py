"""Command-line front end.

Commands
--------
enumerate   facets, trivial counts and symmetry classes of a scenario
bounds      see-saw lower bounds, robustness and moment-matrix upper bounds per class
randomness  min-entropy curve ``(i, h)`` for one inequality
report      computed values against the bundled reference tables
membership  noncontextuality test for a behaviour read from a file
dims        polytope dimensions of the product and per-vertex constructions

Tables are written as TSV into the output directory (``--out``, else the
``NCPOLYTOPE_OUT`` environment variable, else the working directory); a
plain-text summary goes to stdout. Exit status is 0 on success, 1 when a
computation fails or a report cell fails, 2 for usage and input errors.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import golden
from .exactgeom.rational import format_rational, parse_rational
from .pipeline import Inequality, nc_membership, parse_inequality, run_pipeline
from .scenario import ScenarioError, dims_report, get_scenario
from .symmetry import LISTED, classify_facets, find_symmetries, listed_generators

logger = logging.getLogger("ncpolytope")

OUT_ENV = "NCPOLYTOPE_OUT"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    scenario: str
    d: int = 2
    level: int = 1
    restarts: int = 50
    seed: int = 0
    threads: int = 1
    projective: bool = False
    dim_restricted: bool = False
    out: Path = field(default_factory=Path.cwd)
    convention: str = "default"
    ineq: Optional[str] = None
    grid: int = 20
    lo: Optional[float] = None
    hi: Optional[float] = None
    x_star: int = 0
    y_star: int = 0
    behavior: Optional[str] = None
    max_d: Optional[int] = None
    max_level: int = 3
    check_monotone: bool = True


# -- helpers -----------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, (int, Fraction)):
        return format_rational(Fraction(v))
    return f"{v:.6f}"


def _write_tsv(path: Path, header: List[str], rows: List[list]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for r in rows:
            fh.write("\t".join(_fmt(v) if not isinstance(v, str) else v for v in r) + "\n")
    return path


def coordinate_bound(ineq: Inequality) -> bool:
    """True for a bound on a single reduced coordinate."""
    return sum(1 for c in ineq.coeffs if c) == 1


def _classes(s, convention: str = "default", key: Optional[str] = None):
    """Pipeline result and facet classes under a counting convention.

    ``default`` uses every relabelling symmetry and calls a class trivial
    when it reduces to some ``0 <= p <= 1`` constraint. ``tables`` uses the
    generators quoted for a builtin scenario and calls a class trivial only
    when it bounds a single reduced coordinate.
    """
    res = run_pipeline(s)
    if convention == "tables" and key in LISTED:
        gens = listed_generators(key, s)
    else:
        gens = find_symmetries(s, prep=res.prep, meas=res.meas).generators()
    classes = classify_facets(res, gens)
    if convention == "tables":
        classes = [replace(c, trivial=coordinate_bound(c.representative)) for c in classes]
        classes.sort(key=lambda c: (c.trivial, c.orbit_size, c.representative))
    return res, classes


def _seesaw_cfg(cfg: RunConfig):
    from .quantum import SeesawConfig
    return SeesawConfig(restarts=cfg.restarts, seed=cfg.seed, threads=cfg.threads)


def _robust(s, ineq, strategy):
    from .quantum import NoViolation, robustness
    try:
        return robustness(strategy, ineq, ineq.bound, s)
    except NoViolation:
        return 0.0


def _inequality(cfg: RunConfig, s) -> Inequality:
    if cfg.ineq:
        try:
            return golden.named(cfg.scenario, cfg.ineq)
        except KeyError:
            pass
        try:
            return parse_inequality(cfg.ineq, s)
        except Exception as exc:
            raise UsageError(f"cannot read inequality {cfg.ineq!r}: {exc}") from exc
    if cfg.scenario == "s7":
        return golden.named("s7", "I7")
    raise UsageError("--ineq is required for this scenario")


# -- commands -----------------------------------------------------------------------

def cmd_enumerate(cfg: RunConfig, s) -> int:
    res, classes = _classes(s, cfg.convention, cfg.scenario)
    nontriv = [c for c in classes if not c.trivial]
    rows = [[str(i + 1), str(c.orbit_size), "trivial" if c.trivial else "nontrivial",
             c.representative.format(s)] for i, c in enumerate(classes)]
    _write_tsv(cfg.out / f"{s.name}_classes.tsv", ["class", "orbit", "kind", "inequality"], rows)
    _write_tsv(cfg.out / f"{s.name}_facets.tsv", ["facet", "inequality"],
               [[str(i + 1), q.format(s)] for i, q in enumerate(res.raw_facets)])
    print(f"scenario {s.name}: {len(res.prep)} preparation vertices, "
          f"{len(res.meas)} measurement vertices, {len(res.product)} product vertices")
    n_triv = sum(c.orbit_size for c in classes if c.trivial)
    print(f"facets {len(res.raw_facets)}  trivial {n_triv}  "
          f"nontrivial {len(res.raw_facets) - n_triv}  (convention {cfg.convention})")
    print(f"classes {len(classes)} (nontrivial {len(nontriv)}); orbit sizes "
          + " ".join(str(c.orbit_size) for c in classes))
    for line in res.basis.substitution_text():
        print("substitution", line)
    return EXIT_OK


def cmd_bounds(cfg: RunConfig, s) -> int:
    from .hierarchy import dim_restricted_bound, projective_bound, upper_bound
    from .quantum import seesaw
    _, classes = _classes(s, cfg.convention, cfg.scenario)
    header = ["class", "orbit", "inequality", f"Qs{cfg.d}", f"omega{cfg.d}", f"Q{cfg.level}"]
    if cfg.projective:
        header.append(f"Q{cfg.level}proj")
    if cfg.dim_restricted:
        header.append(f"QUB{cfg.d}")
    rows = []
    for i, c in enumerate(c for c in classes if not c.trivial):
        q = c.representative
        try:
            qs, strat = seesaw(s, q, cfg.d, _seesaw_cfg(cfg))
            row = [str(i + 1), str(c.orbit_size), q.format(s), qs, _robust(s, q, strat),
                   upper_bound(s, q, cfg.level)]
            if cfg.projective:
                row.append(projective_bound(s, q, cfg.level))
            if cfg.dim_restricted:
                row.append(dim_restricted_bound(s, q, cfg.d, level=max(cfg.level, 3), seed=cfg.seed))
        except Exception as exc:
            raise RuntimeError(f"class {i + 1}: {exc}") from exc
        rows.append(row)
        print("\t".join(v if isinstance(v, str) else _fmt(v) for v in row))
    path = _write_tsv(cfg.out / f"{s.name}_bounds.tsv", header, rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_randomness(cfg: RunConfig, s) -> int:
    from .hierarchy import entropy_curve, upper_bound
    ineq = _inequality(cfg, s)
    lo = float(ineq.bound) if cfg.lo is None else cfg.lo
    hi = upper_bound(s, ineq, cfg.level) if cfg.hi is None else cfg.hi
    if cfg.grid < 1:
        raise UsageError("--grid needs at least one point")
    grid = [lo] if cfg.grid == 1 else list(np.linspace(lo, hi, cfg.grid))
    curve = entropy_curve(s, ineq, grid, cfg.x_star, cfg.y_star, cfg.level,
                          mono_tol=1e-6 if cfg.check_monotone else np.inf)
    path = _write_tsv(cfg.out / f"{s.name}_randomness.tsv", ["i", "h"],
                      [[i, h] for i, h in curve])
    for i, h in curve:
        print(f"{i:.6f}\t{h:.6f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_membership(cfg: RunConfig, s) -> int:
    if not cfg.behavior:
        raise UsageError("membership needs --behavior FILE")
    try:
        toks = Path(cfg.behavior).read_text().split()
    except OSError as exc:
        raise UsageError(str(exc)) from exc
    # integers and fractions stay exact; decimals take the tolerant float route
    try:
        if any(c in t for t in toks for c in ".eE"):
            p = [float(t) for t in toks]
        else:
            p = [parse_rational(t) for t in toks]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot read behaviour: {exc}") from exc
    if len(p) != s.n_coords:
        raise UsageError(f"behaviour has {len(p)} entries, scenario needs {s.n_coords}")
    res = nc_membership(p, s)
    if res.member:
        print("member")
    else:
        print("not a member; violated inequality:")
        print(res.separating.format(s))
    return EXIT_OK


def cmd_dims(cfg: RunConfig, s) -> int:
    rep = dims_report(s)
    for k, v in vars(rep).items():
        print(f"{k}\t{v}")
    return EXIT_OK


# -- report ------------------------------------------------------------------------

def _cell(name, got, want, tol, one_sided=False):
    if got is None:
        ok = False
    elif one_sided:
        ok = got >= want - tol
    else:
        ok = abs(got - want) <= tol
    return (name, got, want, tol, ok)


def _min_level(s, ineq, want, tol, projective, max_level):
    from .hierarchy import upper_bound
    got = None
    for lvl in range(1, max_level + 1):
        got = upper_bound(s, ineq, lvl, projective=projective)
        if abs(got - want) <= tol:
            return got, lvl
    return got, None


def report_cells(s, key: str, cfg: RunConfig, classes=None):
    """Per-cell comparison ``(name, computed, reference, tolerance, ok)``."""
    from .hierarchy import dim_restricted_bound
    from .quantum import seesaw
    tol = golden.tolerances()
    want = golden.counts(key)
    if classes is None:
        res, classes = _classes(s, golden.convention(key), key)
    else:
        res, classes = classes
    cells = []
    nontriv = [c for c in classes if not c.trivial]
    n_triv = sum(c.orbit_size for c in classes if c.trivial)
    if "facets" in want:
        cells.append(_cell("facets", len(res.raw_facets), want["facets"], 0))
    if "trivial" in want:
        cells.append(_cell("trivial", n_triv, want["trivial"], 0))
    if "nontrivial" in want:
        cells.append(_cell("nontrivial", len(res.raw_facets) - n_triv, want["nontrivial"], 0))
    if "classes" in want:
        cells.append(_cell("classes", len(nontriv), want["classes"], 0))
    rows = golden.rows(key, s)
    got_orbits = sorted(c.orbit_size for c in nontriv)
    want_orbits = sorted(r.orbit for r in rows)
    cells.append(("orbits", " ".join(map(str, got_orbits)), " ".join(map(str, want_orbits)), 0,
                  got_orbits == want_orbits))
    for i, r in enumerate(rows):
        lab = r.label(i)
        v = r.values
        for d in (2, 3, 4):
            if f"Qs{d}" not in v or (cfg.max_d and d > cfg.max_d):
                continue
            qs, strat = seesaw(s, r.inequality, d, _seesaw_cfg(cfg))
            cells.append(_cell(f"{lab} Qs{d}", qs, v[f"Qs{d}"], tol["Qs"], one_sided=True))
            if f"omega{d}" in v:
                cells.append(_cell(f"{lab} omega{d}", _robust(s, r.inequality, strat),
                                   v[f"omega{d}"], tol["omega"]))
        if "Q1" in v:
            got, lvl = _min_level(s, r.inequality, v["Q1"], tol["Q1"], False, cfg.max_level)
            name = f"{lab} Q1" + (f" (level {lvl})" if lvl else "")
            cells.append(_cell(name, got, v["Q1"], tol["Q1"]))
        if "Q1proj" in v:
            got, lvl = _min_level(s, r.inequality, v["Q1proj"], tol["Q1proj"], True, 1)
            cells.append(_cell(f"{lab} Q1proj", got, v["Q1proj"], tol["Q1proj"]))
        if "QUB2" in v and cfg.dim_restricted:
            got = dim_restricted_bound(s, r.inequality, 2, level=3, seed=cfg.seed)
            cells.append(_cell(f"{lab} QUB2", got, v["QUB2"], tol["QUB2"]))
    return cells


def cmd_report(cfg: RunConfig, s) -> int:
    key = cfg.scenario
    if key not in golden.scenario_keys():
        raise UsageError(f"no reference values for {key!r}")
    cells = report_cells(s, key, cfg)
    rows = []
    for name, got, want, tol, ok in cells:
        rows.append([name, got if not isinstance(got, str) else got,
                     want if not isinstance(want, str) else want, tol, "pass" if ok else "FAIL"])
        g = got if isinstance(got, str) else _fmt(got)
        w = want if isinstance(want, str) else _fmt(want)
        print(f"{'pass' if ok else 'FAIL'}\t{name}\tcomputed {g}\treference {w}\ttol {tol}")
    _write_tsv(cfg.out / f"{key}_report.tsv", ["cell", "computed", "reference", "tolerance", "status"],
               rows)
    failed = sum(1 for c in cells if not c[4])
    print(f"{len(cells) - failed}/{len(cells)} cells pass")
    return EXIT_OK if not failed else EXIT_FAIL


COMMANDS = {
    "enumerate": cmd_enumerate,
    "bounds": cmd_bounds,
    "randomness": cmd_randomness,
    "report": cmd_report,
    "membership": cmd_membership,
    "dims": cmd_dims,
}


# -- argument parsing ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ncpolytope",
                                 description="Noncontextuality polytopes and quantum bounds.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("target", nargs="?", help="builtin scenario key or scenario file")
    ap.add_argument("--scenario", help="builtin scenario key (s1..s9)")
    ap.add_argument("--file", help="scenario description file")
    ap.add_argument("--d", type=int, default=2, help="Hilbert-space dimension (default 2)")
    ap.add_argument("--level", type=int, default=1, help="moment-matrix level (default 1)")
    ap.add_argument("--restarts", type=int, default=50, help="see-saw restarts (default 50)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--projective", action="store_true", help="also report projective bounds")
    ap.add_argument("--dim-restricted", action="store_true",
                    help="also report dimension-restricted upper bounds")
    ap.add_argument("--convention", choices=["default", "tables"], default="default",
                    help="class counting convention (report follows each table's own)")
    ap.add_argument("--out", help=f"output directory (default ${OUT_ENV} or the working directory)")
    ap.add_argument("--ineq", help="inequality text or reference row name (e.g. I7)")
    ap.add_argument("--grid", type=int, default=20, help="number of curve points")
    ap.add_argument("--lo", type=float, help="lowest inequality value of the curve")
    ap.add_argument("--hi", type=float, help="highest inequality value of the curve")
    ap.add_argument("--x-star", type=int, default=0)
    ap.add_argument("--y-star", type=int, default=0)
    ap.add_argument("--behavior", help="file of whitespace-separated probabilities")
    ap.add_argument("--max-d", type=int, help="report: largest see-saw dimension to run")
    ap.add_argument("--skip-seesaw-d7", action="store_true",
                    help="report: skip see-saw columns above dimension 4")
    ap.add_argument("--max-level", type=int, default=3, help="report: highest hierarchy level")
    ap.add_argument("--no-monotone-check", action="store_true")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def make_config(args) -> RunConfig:
    sources = [v for v in (args.target, args.scenario, args.file) if v]
    if len(sources) != 1:
        raise UsageError("give exactly one scenario (positional, --scenario or --file)")
    for name in ("d", "level", "restarts", "threads", "grid", "max_level"):
        if getattr(args, name) < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")
    out = Path(args.out or os.environ.get(OUT_ENV) or Path.cwd())
    max_d = args.max_d if args.max_d else (4 if args.skip_seesaw_d7 else None)
    return RunConfig(
        command=args.command, scenario=sources[0], d=args.d, level=args.level,
        restarts=args.restarts, seed=args.seed, threads=args.threads,
        projective=args.projective, dim_restricted=args.dim_restricted, out=out,
        convention=args.convention, ineq=args.ineq, grid=args.grid, lo=args.lo, hi=args.hi,
        x_star=args.x_star, y_star=args.y_star, behavior=args.behavior, max_d=max_d,
        max_level=args.max_level, check_monotone=not args.no_monotone_check)


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        s = get_scenario(cfg.scenario)
    except (UsageError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.time()
    try:
        code = COMMANDS[cfg.command](cfg, s)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        logger.debug("computation failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    logger.info("%s finished in %.1f s", cfg.command, time.time() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
