"""Command-line front end.

Exit codes: 0 every checked value matches, 1 a proved value disagrees (or a
report is internally inconsistent), 2 bad input, 3 only a conjectured value
disagrees, 4 environment or network failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Dict, Iterable, List, Optional, Sequence

from . import __version__
from .cache import MatrixCache, default_cache_dir
from .ecsplit import CurveDataUnavailable, MalformedCurveData, fetch_curve, splitting_primes
from .eislocus import (
    EisensteinLocus,
    cuspidal_divisor_order_valuation,
    enumerate_loci,
    s_m_set,
)
from .kernelcalc import (
    SCHEMA,
    KernelReport,
    _prediction,
    default_jobs,
    kernel_dimension,
    memory_capped_jobs,
    qr2_expectation,
    reports_to_csv,
    scan_qr2_reports,
    scan_qr_reports,
)
from .modsym import genus

EXIT_OK, EXIT_THEOREM, EXIT_USAGE, EXIT_CONJECTURE, EXIT_ENV = 0, 1, 2, 3, 4
SLOW_THRESHOLD = 2000  # 2g above this needs --slow

BANNER = "!" * 72


class UsageError(ValueError):
    pass


# --- rendering ---------------------------------------------------------------


def render_table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    rows = [[str(c) for c in r] for r in rows]
    widths = [len(h) for h in header]
    for r in rows:
        widths = [max(w, len(c)) for w, c in zip(widths, r)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*r) for r in rows]
    return "\n".join(line.rstrip() for line in lines) + "\n"


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render_json(payload: dict) -> str:
    return json.dumps({"schema": SCHEMA, **payload}, indent=2) + "\n"


def _emit(args, header, rows, payload: dict) -> None:
    if args.format == "json":
        sys.stdout.write(render_json(payload))
    elif args.format == "csv":
        sys.stdout.write(render_csv(header, rows))
    else:
        sys.stdout.write(render_table(header, rows))


REPORT_HEADER = ["N", "ell", "locus", "computed", "predicted", "bound", "maximal", "status"]


def _report_row(rep: KernelReport) -> list:
    return [
        rep.N,
        rep.ell,
        rep.locus_text,
        rep.computed_dim,
        str(rep.predicted),
        rep.upper_bound,
        "yes" if rep.maximal_by_formula else "no",
        rep.status(),
    ]


def exit_code_for(statuses: Iterable[str]) -> int:
    statuses = set(statuses)
    if statuses & {"theorem_mismatch", "incoherent"}:
        return EXIT_THEOREM
    if "conjecture_mismatch" in statuses:
        return EXIT_CONJECTURE
    return EXIT_OK


def _conjecture_banner(reports: Sequence[KernelReport]) -> None:
    bad = [r for r in reports if r.status() == "conjecture_mismatch"]
    if not bad:
        return
    lines = [BANNER, "CONJECTURE MISMATCH: possible counterexample"]
    for r in bad:
        lines.append(f"  N={r.N} ell={r.ell} locus={r.locus_text}: computed {r.computed_dim}, expected {r.predicted}")
    lines.append(BANNER)
    print("\n".join(lines), file=sys.stderr)


def _emit_reports(args, reports: List[KernelReport], extra: Optional[dict] = None) -> int:
    payload = {"reports": [r.to_json() for r in reports]}
    payload.update(extra or {})
    if args.format == "csv":
        sys.stdout.write(reports_to_csv(reports))
    else:
        _emit(args, REPORT_HEADER, [_report_row(r) for r in reports], payload)
    _conjecture_banner(reports)
    return exit_code_for(r.status() for r in reports)


# --- argument helpers ----------------------------------------------------------


def _cache(args) -> MatrixCache:
    return MatrixCache(args.cache_dir or default_cache_dir())


def _jobs(args, levels: Sequence[int]) -> int:
    jobs = args.jobs if args.jobs is not None else default_jobs()
    return memory_capped_jobs(levels, jobs)


def _gate(args, levels: Iterable[int]) -> None:
    for N in levels:
        if 2 * genus(N) > SLOW_THRESHOLD and not args.slow:
            raise UsageError(f"level {N} has 2g = {2 * genus(N)} > {SLOW_THRESHOLD}; rerun with --slow")


def parse_eps(text: str, N: int, ell: int) -> EisensteinLocus:
    """'19:-1,41:+1' -> locus; primes of N not listed get their only allowed sign."""
    eps: Dict[int, int] = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        try:
            p, e = item.split(":")
            eps[int(p)] = int(e)
        except ValueError as exc:
            raise UsageError(f"bad --eps entry {item!r}; expected p:e") from exc
    matches = [
        loc for loc in enumerate_loci(N, ell) if all(loc.eps_map.get(p) == e for p, e in eps.items())
    ]
    if not matches:
        raise UsageError(f"--eps {text!r} selects no locus at level {N}")
    if len(matches) > 1:
        raise UsageError(f"--eps {text!r} is ambiguous at level {N}")
    return matches[0]


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {v}")
    return v


# --- commands ----------------------------------------------------------------


def cmd_loci(args) -> int:
    header = ["locus", "s", "s0", "t", "u", "u0", "u1", "maximal", "S_m", "predicted", "bound"]
    rows, items = [], []
    for loc in enumerate_loci(args.N, args.ell):
        c = loc.level_class.counts()
        pred, bound, maximal = _prediction(loc)
        sm = s_m_set(loc) if maximal else []
        rows.append(
            [loc.describe().strip("{}").replace(" ", ""), *c.values(), "yes" if maximal else "no", " ".join(map(str, sm)) or "-", str(pred), bound]
        )
        items.append(
            {
                "locus": [list(x) for x in loc.eps],
                **c,
                "maximal": maximal,
                "S_m": sm,
                "predicted": pred.to_json(),
                "upper_bound": bound,
            }
        )
    _emit(args, header, rows, {"N": args.N, "ell": args.ell, "loci": items})
    return EXIT_OK


def cmd_dim(args) -> int:
    loci = [parse_eps(args.eps, args.N, args.ell)] if args.eps else enumerate_loci(args.N, args.ell)
    _gate(args, [args.N])
    cache = _cache(args)
    reports = [kernel_dimension(args.N, args.ell, loc, cache=cache) for loc in loci]
    return _emit_reports(args, reports)


def cmd_scan_qr(args) -> int:
    levels = [args.q * r for r in range(args.ell + 1, args.r_max + 1, args.ell)]
    _gate(args, levels[-1:])
    cache = _cache(args)
    pairs = scan_qr_reports(args.q, args.ell, args.r_max, jobs=_jobs(args, levels), cache=cache)
    reports = [rep for _, rep in pairs]
    hits = [r for r, rep in pairs if rep.computed_dim == 3]
    if args.format == "table":
        rows = [[r, rep.N, rep.computed_dim] for r, rep in pairs]
        sys.stdout.write(render_table(["r", "N", "dim"], rows))
        print(f"dim 3 at r = {', '.join(map(str, hits)) or 'none'}")
    elif args.format == "csv":
        sys.stdout.write(render_csv(["r", "N", "dim"], [[r, rep.N, rep.computed_dim] for r, rep in pairs]))
    else:
        sys.stdout.write(
            render_json({"q": args.q, "ell": args.ell, "r_max": args.r_max, "dim3": hits, "reports": [x.to_json() for x in reports]})
        )
    return exit_code_for(rep.status() for rep in reports)


def cmd_scan_qr2(args) -> int:
    levels = [args.q * r * r for r in args.r]
    _gate(args, levels)
    cache = _cache(args)
    pairs = scan_qr2_reports(args.q, args.ell, args.r, jobs=_jobs(args, levels), cache=cache)
    reports = []
    for r, rep in pairs:
        # proved when the level-qr kernel already has dimension 3
        rep.predicted = qr2_expectation(args.q, r, args.ell, cache=cache)
        reports.append(rep)
    return _emit_reports(args, reports, {"q": args.q})


def cmd_ec_split(args) -> int:
    kwargs = dict(cache_dir=args.cache_dir, offline=args.offline)
    rec = fetch_curve(args.label, **kwargs)
    primes = splitting_primes(args.label, args.ell, args.r_max, **kwargs)
    if args.format == "json":
        sys.stdout.write(
            render_json(
                {
                    "label": rec.label,
                    "ainvs": list(rec.ainvs),
                    "ell": args.ell,
                    "r_max": args.r_max,
                    "primes": primes,
                    "data_source": rec.source,
                    "retrieved": rec.fetched_at,
                }
            )
        )
    else:
        _emit(args, ["label", "ell", "r"], [[rec.label, args.ell, r] for r in primes], {})
    return EXIT_OK


def cmd_cusp_order(args) -> int:
    v = cuspidal_divisor_order_valuation(args.M, args.N, args.ell)
    _emit(
        args,
        ["M", "N", "ell", "valuation"],
        [[args.M, args.N, args.ell, v]],
        {"M": args.M, "N": args.N, "ell": args.ell, "valuation": v},
    )
    return EXIT_OK


def cmd_cache(args) -> int:
    cache = _cache(args)
    if args.action == "stats":
        st = cache.stats()
        if args.format == "json":
            sys.stdout.write(render_json({"root": str(cache.root), **st}))
        else:
            print(f"{st['entries']} entries, {st['bytes']} bytes in {cache.root}")
        return EXIT_OK
    if args.action == "clear":
        n = cache.clear()
        print(f"removed {n} entries")
        return EXIT_OK
    count, bad = cache.verify()
    if args.format == "json":
        sys.stdout.write(render_json({"entries": count, "corrupt": [{"file": f, "problem": p} for f, p in bad]}))
    else:
        print(f"{count} entries, {len(bad)} corrupt")
        for name, problem in bad:
            print(f"  {name}: {problem}")
    return EXIT_THEOREM if bad else EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["table", "json", "csv"], default="table")
    common.add_argument("--cache-dir", default=None, help="default: $EISK_CACHE_DIR or ~/.eiskernel")
    common.add_argument("--jobs", type=_positive, default=None, help="worker processes for scans")
    common.add_argument("--slow", action="store_true", help="allow levels with 2g > 2000")
    common.add_argument("--offline", action="store_true", help="use packaged curve fixtures and the cache only")

    parser = argparse.ArgumentParser(prog="eiskernel", description="Kernels of rational Eisenstein primes on J_0(N).")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("loci", parents=[common], help="list Eisenstein loci at level N")
    p.add_argument("N", type=_positive)
    p.add_argument("ell", type=_positive)
    p.set_defaults(func=cmd_loci)

    p = sub.add_parser("dim", parents=[common], help="compute dim J_0(N)[m]")
    p.add_argument("N", type=_positive)
    p.add_argument("ell", type=_positive)
    p.add_argument("--eps", default=None, help="locus selector, e.g. 19:-1,41:+1")
    p.set_defaults(func=cmd_dim)

    p = sub.add_parser("scan-qr", parents=[common], help="dim J_0(qr)[n] for r = 1 mod ell up to r_max")
    p.add_argument("q", type=_positive)
    p.add_argument("ell", type=_positive)
    p.add_argument("r_max", type=_positive)
    p.set_defaults(func=cmd_scan_qr)

    p = sub.add_parser("scan-qr2", parents=[common], help="dim J_0(qr^2)[m] for the given r")
    p.add_argument("q", type=_positive)
    p.add_argument("ell", type=_positive)
    p.add_argument("r", type=_positive, nargs="+")
    p.set_defaults(func=cmd_scan_qr2)

    p = sub.add_parser("ec-split", parents=[common], help="primes r <= r_max splitting in Q(E[ell])")
    p.add_argument("label")
    p.add_argument("ell", type=_positive)
    p.add_argument("r_max", type=_positive)
    p.set_defaults(func=cmd_ec_split)

    p = sub.add_parser("cusp-order", parents=[common], help="ell-valuation of the order of C_{M,N}")
    p.add_argument("M", type=_positive)
    p.add_argument("N", type=_positive)
    p.add_argument("ell", type=_positive)
    p.set_defaults(func=cmd_cusp_order)

    p = sub.add_parser("cache", parents=[common], help="inspect the matrix cache")
    p.add_argument("action", choices=["stats", "clear", "verify"])
    p.set_defaults(func=cmd_cache)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CurveDataUnavailable, MalformedCurveData) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except (ValueError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
