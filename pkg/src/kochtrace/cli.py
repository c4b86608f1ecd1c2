"""Command-line entry point: ``kochtrace <group> <command> [options]``.

Exit status is 0 when every asserted invariant holds, 1 on an invariant
failure (the first counterexample is printed to stderr as JSON) and 2 on
malformed input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

import mpmath

from . import arens_eells, bvfun, extension, geometry, trace_solver, tree
from .boundary import BoundaryData, frac_to_json
from .errors import KochTraceError, ValidationError


class InvariantFailure(Exception):
    def __init__(self, message: str, counterexample=None):
        super().__init__(message)
        self.counterexample = counterexample


# -- io helpers -----------------------------------------------------------------

def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _write_csv(path: str | None, header, rows) -> None:
    if not path:
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])


def _cell(x):
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        return repr(x)
    if x is None:
        return ""
    return x


def _enclosure_json(e: arens_eells.Enclosure) -> dict:
    with mpmath.workdps(arens_eells.ALPHA_DPS):
        return {"lo": mpmath.nstr(e.lo, 40, min_fixed=-1, max_fixed=1),
                "hi": mpmath.nstr(e.hi, 40, min_fixed=-1, max_fixed=1)}


def _norm_json(x):
    return _enclosure_json(x) if isinstance(x, arens_eells.Enclosure) else frac_to_json(x)


# -- tree and geometry --------------------------------------------------------------

def cmd_tree_build(args) -> None:
    _emit(tree.tree_summary(args.depth), args.out)


def cmd_geom_koch(args) -> None:
    curve = geometry.generate_koch(args.depth)
    if args.svg:
        geometry.export_svg([curve], args.svg)
    summary = {"generation": curve.generation, "segments": curve.segment_count,
               "perimeter": frac_to_json(curve.perimeter),
               "closed": curve.is_closed(), "simple": curve.is_simple()}
    if args.out:
        _emit(curve.to_json(), args.out)
    print(json.dumps(summary, sort_keys=True))
    if not (summary["closed"] and summary["simple"]):
        raise InvariantFailure("Koch polyline is not a simple closed curve", summary)


def cmd_geom_whitney(args) -> None:
    polygons = geometry.build_whitney_polygons(args.depth)
    if args.svg:
        items = list(polygons)
        if args.curve:
            items.append(geometry.generate_koch(args.depth + 2))
        geometry.export_svg(items, args.svg)
    if args.out:
        _emit(geometry.polygons_to_json(polygons), args.out)
    if args.validate:
        report = geometry.validate_whitney(polygons, seed=args.seed)
        print(json.dumps(report.to_json(), sort_keys=True))
        _write_csv(args.report, ("depth", "property", "holds"), report.rows())
        if not report.ok:
            bad = next(c for c in report.checks if not c.holds)
            raise InvariantFailure(f"Whitney property {bad.name} fails",
                                   report.to_json()["checks"][report.checks.index(bad)])
    else:
        print(json.dumps({"polygons": len(polygons), "depth": args.depth}))


# -- norms ------------------------------------------------------------------------------

def cmd_norm_bv(args) -> None:
    f = bvfun.TreeFunction.from_json(_read_json(args.func_file))
    _emit({"norm": frac_to_json(bvfun.bv_norm(f)), "witness": None}, args.out)


def cmd_norm_trace(args) -> None:
    g = BoundaryData.from_json(_read_json(args.data))
    norm, f = trace_solver.trace_norm(g)
    result = {"norm": frac_to_json(norm), "witness": f.to_json()}
    if args.oracle:
        oracle = trace_solver.trace_norm_bruteforce(g, depth_cap=4)
        result["oracle"] = frac_to_json(oracle)
        if oracle != norm:
            _emit(result, args.out)
            raise InvariantFailure("solver and oracle disagree", result)
    _emit(result, args.out)


def cmd_norm_ae(args) -> None:
    m = arens_eells.Molecule.from_json(_read_json(args.molecule))
    norm, plan = arens_eells.ae_transport(m, args.metric)
    witness = [{"from": tree.BoundaryPoint.from_position(p).to_json(),
                "to": tree.BoundaryPoint.from_position(q).to_json(),
                "mass": frac_to_json(w)} for p, q, w in plan]
    _emit({"norm": _norm_json(norm), "metric": args.metric, "witness": witness}, args.out)


# -- extensions ----------------------------------------------------------------------------

def cmd_extend_indicator(args) -> None:
    arc = tree.Arc.from_json(_read_json(args.inp))
    f = extension.indicator_extension(arc)
    _emit({"function": f.to_json(), "norm": frac_to_json(bvfun.bv_norm(f))}, args.out)


def cmd_extend_monotone(args) -> None:
    F = extension.StepFunction.from_json(_read_json(args.inp))
    ext = extension.monotone_extension(F)
    c = ext.constant
    _emit({"function": ext.function.to_json(), "norm": frac_to_json(ext.norm),
           "d_K": frac_to_json(ext.d_K), "scale": frac_to_json(ext.scale),
           "chain_bound": frac_to_json(ext.chain_bound),
           "constant": None if c is None else frac_to_json(c)}, args.out)


def cmd_extend_inverse_s(args) -> None:
    g = BoundaryData.from_json(_read_json(args.inp))
    sol = trace_solver.solve(g)
    f = sol.minimizer
    if not bvfun.trace_equals(f, g):
        raise InvariantFailure("trace of S g differs from g", g.to_json())
    _emit({"function": f.to_json(), "norm": frac_to_json(bvfun.bv_norm(f)),
           "trace_norm": frac_to_json(sol.norm)}, args.out)


# -- verification suites -----------------------------------------------------------------

def cmd_verify(args) -> None:
    kind = args.suite
    if kind == "whitney":
        report = geometry.validate_whitney(geometry.build_whitney_polygons(args.depth),
                                           seed=args.seed)
        _write_csv(args.report, ("depth", "property", "holds"), report.rows())
        for c in report.checks:
            print(f"{c.name}: {'ok' if c.holds else 'FAIL'}")
        if not report.ok:
            bad = next(c for c in report.checks if not c.holds)
            raise InvariantFailure(f"Whitney property {bad.name} fails", bad.details)
    elif kind == "trace-oracle":
        rows = trace_solver.verify_trace_oracle(args.depth, args.samples, args.seed)
        _write_csv(args.report, ("sample", "norm", "oracle", "match"),
                   [(i, n, o, int(ok)) for i, n, o, ok in rows])
        bad = [r for r in rows if not r[3]]
        print(f"{len(rows) - len(bad)}/{len(rows)} exact matches")
        if bad:
            raise InvariantFailure("solver and oracle disagree",
                                   {"sample": bad[0][0], "norm": frac_to_json(bad[0][1]),
                                    "oracle": frac_to_json(bad[0][2])})
    elif kind in ("isomorphism", "metric-compare"):
        if kind == "isomorphism":
            depths = list(range(min(3, args.depth), args.depth + 1))
            rep = arens_eells.verify_isomorphism(depths, args.samples, args.seed, args.threads)
        else:
            depths = list(range(1, args.depth + 1))
            rep = arens_eells.metric_compare(depths, args.samples, args.seed, args.threads)
        _write_csv(args.report, arens_eells.CSV_HEADER, [r.as_tuple() for r in rep.rows])
        for r in rep.rows:
            print(",".join(str(_cell(x)) for x in r.as_tuple()))
        if not rep.ok:
            raise InvariantFailure(f"{kind} invariant fails", rep.failures[0])
    elif kind == "density":
        ks = list(range(2, args.depth + 1))
        rows = extension.density_decay(ks)
        _write_csv(args.report, ("function", "k", "norm", "ratio"), rows)
        limit = Fraction(4, 9) + Fraction(1, 20)
        for name, k, norm, ratio in rows:
            print(f"{name},{k},{float(norm):.6g},{'' if ratio is None else f'{float(ratio):.4f}'}")
        bad = [r for r in rows if r[3] is not None and r[3] > limit]
        if bad:
            raise InvariantFailure("density decay ratio above 4/9 + 0.05",
                                   {"function": bad[0][0], "k": bad[0][1],
                                    "ratio": frac_to_json(bad[0][3])})
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(kind)


# -- parser -------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kochtrace", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=1, help="worker threads for sample batches")
    p.add_argument("--seed", type=int, default=0, help="random seed for sampled suites")
    groups = p.add_subparsers(dest="group", required=True)

    g = groups.add_parser("tree", help="Whitney tree summaries")
    sub = g.add_subparsers(dest="command", required=True)
    c = sub.add_parser("build", help="vertex counts, kinds and cylinder intervals")
    c.add_argument("--depth", type=int, required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_tree_build)

    g = groups.add_parser("geom", help="Koch approximants and the Whitney covering")
    sub = g.add_subparsers(dest="command", required=True)
    c = sub.add_parser("koch", help="Koch polyline K_n")
    c.add_argument("--depth", type=int, required=True)
    c.add_argument("--svg")
    c.add_argument("--out", help="vertex JSON")
    c.set_defaults(func=cmd_geom_koch)
    c = sub.add_parser("whitney", help="Whitney polygons to a given generation")
    c.add_argument("--depth", type=int, required=True)
    c.add_argument("--svg")
    c.add_argument("--curve", action="store_true", help="draw K_(depth+2) in the SVG")
    c.add_argument("--out", help="polygon JSON")
    c.add_argument("--validate", action="store_true")
    c.add_argument("--report", help="CSV of property checks")
    c.set_defaults(func=cmd_geom_whitney)

    g = groups.add_parser("norm", help="exact norms")
    sub = g.add_subparsers(dest="command", required=True)
    c = sub.add_parser("bv", help="tree BV norm of a tree function")
    c.add_argument("--func", dest="func_file", required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_norm_bv)
    c = sub.add_parser("trace", help="quotient trace norm of boundary data")
    c.add_argument("--data", required=True)
    c.add_argument("--oracle", action="store_true", help="also run the brute-force oracle")
    c.add_argument("--out")
    c.set_defaults(func=cmd_norm_trace)
    c = sub.add_parser("ae", help="Arens-Eells norm of a molecule")
    c.add_argument("--molecule", required=True)
    c.add_argument("--metric", choices=arens_eells.METRICS, default="tilde_d")
    c.add_argument("--out")
    c.set_defaults(func=cmd_norm_ae)

    g = groups.add_parser("extend", help="extension operators")
    sub = g.add_subparsers(dest="command", required=True)
    for name, fn, what in (("indicator", cmd_extend_indicator, "arc JSON"),
                           ("monotone", cmd_extend_monotone, "step function JSON"),
                           ("inverse-s", cmd_extend_inverse_s, "boundary data JSON")):
        c = sub.add_parser(name, help=f"extend {what}")
        c.add_argument("--in", dest="inp", required=True)
        c.add_argument("--out")
        c.set_defaults(func=fn)

    g = groups.add_parser("verify", help="seeded verification suites")
    g.add_argument("suite", choices=("whitney", "trace-oracle", "isomorphism",
                                     "metric-compare", "density"))
    g.add_argument("--depth", type=int, required=True,
                   help="covering depth, data depth, or the largest depth/k of a sweep")
    g.add_argument("--samples", type=int, default=100)
    g.add_argument("--seed", dest="suite_seed", type=int, help="overrides the global --seed")
    g.add_argument("--threads", dest="suite_threads", type=int,
                   help="overrides the global --threads")
    g.add_argument("--report", help="CSV output")
    g.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "suite_seed", None) is not None:
        args.seed = args.suite_seed
    if getattr(args, "suite_threads", None) is not None:
        args.threads = args.suite_threads
    try:
        args.func(args)
    except InvariantFailure as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        print(json.dumps(exc.counterexample, sort_keys=True, default=str), file=sys.stderr)
        return 1
    except (ValidationError, OSError, KeyError, TypeError, ValueError, KochTraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
