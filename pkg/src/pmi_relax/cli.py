"""Command-line front end.

Exit codes: 0 success, 1 input/parse error, 2 solver or analysis failure
(including resource refusals and deviating bench rows), 3 certificate
verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Sequence

from . import bench
from .certificates import Certificate, CertificateMismatch, verify_certificate
from .cone import ConeSizeError
from .model import PmiProblem, ProblemFormatError, load_problem
from .poly import Polynomial
from .report import format_table, plot_bounds, to_csv, write_csv
from .sdp.assembly import SamplingError
from .sdp.relax import MODES, RelaxOptions, ResourceLimitError, build_relaxation_cone, rebuild_cone, relax
from .sdp.sdpa import export_sdpa
from .sparsity import SparsityError, check_rip, extract_cliques

log = logging.getLogger("pmi_relax")

EXIT_OK, EXIT_PARSE, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3
DEFAULT_SEED = 0
AUTO_MAX_ORDER = 8


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_PARSE):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- run records

@dataclass
class RunRecord:
    problem: str
    problem_hash: str
    mode: str
    order: int
    seed: int
    bound: float
    status: str
    primal_residual: float
    dual_residual: float
    gap: float
    wall_time: float
    certificate_path: str | None = None
    verified: bool | None = None
    notes: str = ""

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return str(v)
            return v
        return json.dumps({k: clean(v) for k, v in asdict(self).items()})


class RunLog:
    """Append-only JSON-lines log; writes are serialized."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()

    def append(self, rec: RunRecord) -> None:
        if self.path is None:
            return
        with self._lock, self.path.open("a") as fh:
            fh.write(rec.to_json() + "\n")


def _record(p: PmiProblem, out, seed: int, cert_path: str | None = None) -> RunRecord:
    res = out.result
    return RunRecord(p.name, p.content_hash(), out.mode, out.order, seed, out.bound, res.status.value,
                     res.primal_residual, res.dual_residual, res.gap, out.wall_time, cert_path,
                     out.verified, "; ".join(out.notes))


# ---------------------------------------------------------------- helpers

def _default_seed() -> int:
    env = os.environ.get("PMI_RELAX_SEED")
    if env is None:
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise CliError(f"PMI_RELAX_SEED must be an integer, got {env!r}") from None


def _load(path: str) -> PmiProblem:
    try:
        return load_problem(path)
    except FileNotFoundError:
        raise CliError(f"no such file: {path}") from None
    except (ProblemFormatError, ValueError, json.JSONDecodeError) as exc:
        raise CliError(f"{path}: {exc}") from None


def _apply_objective(p: PmiProblem, choice: str | None) -> PmiProblem:
    if choice is None:
        return p
    if choice.isdigit():
        if not p.name.startswith("example1"):
            raise CliError("a numeric --objective selects one of the four objectives of the example1 family")
        k = int(choice)
        if k not in (1, 2, 3, 4):
            raise CliError("--objective must be 1, 2, 3 or 4")
        return replace(p.with_objective(bench.example1_objective(k), known_optimum=2.0), name=f"example1-f{k}")
    try:
        data = json.loads(Path(choice).read_text())
        return p.with_objective(Polynomial.from_json(p.n, data))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"cannot read objective {choice!r}: {exc}") from None


def _parse_order(text: str) -> int | str:
    if text == "auto":
        return text
    try:
        m = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("order must be a positive integer or 'auto'") from None
    if m < 1:
        raise argparse.ArgumentTypeError("order must be >= 1")
    return m


def _parse_range(text: str) -> list[int]:
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; use A..B or a comma list") from None


def _options(args, **over) -> RelaxOptions:
    kw = dict(tol=args.tol, seed=args.seed, oversample=args.oversample, max_block_size=args.max_block_size,
              commutative=getattr(args, "commutative", False))
    kw.update(over)
    return RelaxOptions(**kw)


def _fmt_bound(b: float) -> str:
    return f"{b:.10g}" if math.isfinite(b) else ("-inf (relaxation infeasible)" if b < 0 else "+inf")


def _solve_auto(p: PmiProblem, mode: str, opts: RelaxOptions, max_order: int, stop_tol: float = 1e-3):
    """Sweep m = 1, 2, ... until the known optimum is reached, the bound
    stalls, or a size cap refuses the next order."""
    outs = []
    for m in range(1, max_order + 1):
        try:
            out = relax(p, m, mode, opts)
        except (ConeSizeError, ResourceLimitError) as exc:
            if not outs:
                raise
            log.info("order %d refused: %s", m, exc)
            break
        outs.append(out)
        b = out.bound
        if p.known_optimum is not None and math.isfinite(b) and abs(b - p.known_optimum) <= stop_tol:
            break
        if p.known_optimum is None and len(outs) >= 2 and math.isfinite(b) and abs(b - outs[-2].bound) <= 1e-6:
            break
    return outs


# ---------------------------------------------------------------- subcommands

def cmd_gen(args) -> int:
    fam = args.family
    if fam == "ex1":
        p = bench.gen_example1(args.objective or 1)
    elif fam == "ex2":
        p = bench.gen_example2(args.variant)
    elif fam == "chain":
        p = bench.gen_chain(args.n)
    elif fam == "corrmat":
        p = bench.gen_corrmat(args.q)
    else:
        p = bench.gen_random(args.n, args.q, args.deg, args.seed, args.sparsity)
    text = json.dumps(p.to_json(), indent=1)
    if args.output:
        Path(args.output).write_text(text + "\n")
        print(f"wrote {args.output} ({p.name}, n={p.n}, blocks={[b.q for b in p.blocks]})")
    else:
        print(text)
    return EXIT_OK


def cmd_solve(args) -> int:
    p = _apply_objective(_load(args.problem), args.objective)
    opts = _options(args, export_sdpa=args.export_sdpa, verify=not args.no_verify)
    runlog = RunLog(args.log)
    try:
        if args.order == "auto":
            outs = _solve_auto(p, args.mode, opts, args.max_order)
        else:
            outs = [relax(p, args.order, args.mode, opts)]
    except (ConeSizeError, ResourceLimitError) as exc:
        print(f"refused: {exc}")
        return EXIT_SOLVER
    except (SparsityError, SamplingError, ValueError) as exc:
        print(f"error: {exc}")
        return EXIT_SOLVER
    code = EXIT_OK
    for out in outs:
        cert_path = None
        if out.certificate is not None and args.certificate:
            cert_path = args.certificate if len(outs) == 1 else f"{args.certificate}.m{out.order}"
            out.certificate.save(cert_path)
        runlog.append(_record(p, out, args.seed, cert_path))
        res = out.result
        verdict = {None: "not checked", True: "verified", False: "FAILED"}[out.verified]
        print(f"{p.name or 'problem'}  mode={out.mode}  order={out.order}  bound={_fmt_bound(out.bound)}")
        print(f"  status {res.status.value}: {res.message}; pinf {res.primal_residual:.1e} dinf "
              f"{res.dual_residual:.1e} gap {res.gap:.1e}; {res.iterations} it, {out.wall_time:.2f}s")
        print(f"  certificate: {verdict}" + (f" -> {cert_path}" if cert_path else ""))
        if out.certificate is not None and out.verified is False:
            print(f"  failed checks: {', '.join(out.certificate.report.get('failed', []))}")
        for note in out.notes:
            print(f"  note: {note}")
    last = outs[-1]
    if args.order == "auto":
        print(f"achieving order: {last.order}")
    if not last.result.status.ok:
        code = EXIT_SOLVER
    elif last.verified is False:
        code = EXIT_VERIFY
    return code


def cmd_verify(args) -> int:
    p = _apply_objective(_load(args.problem), args.objective)
    try:
        cert = Certificate.load(args.certificate)
    except FileNotFoundError:
        raise CliError(f"no such file: {args.certificate}") from None
    except (ValueError, json.JSONDecodeError) as exc:
        raise CliError(f"{args.certificate}: {exc}") from None
    try:
        cone = rebuild_cone(p, cert.cone)
        report = verify_certificate(cert, p, cone, psd_tol=args.psd_tol, identity_tol=args.identity_tol)
    except CertificateMismatch as exc:
        print(f"verification failed: hash mismatch ({exc})")
        return EXIT_VERIFY
    except (ConeSizeError, ValueError) as exc:
        print(f"verification failed: {exc}")
        return EXIT_VERIFY
    names = {"psd": "PSD check", "identity": "identity residual", "coefficients": "coefficient residual"}
    for key in ("psd", "identity", "coefficients"):
        if key in report:
            c = report[key]
            val = c.get("min_eigenvalue", c.get("max_residual"))
            print(f"{names[key]:22s} {'pass' if c['passed'] else 'FAIL'}  ({val:.3e})")
    if report["verified"]:
        print(f"verified: f - {cert.bound:.10g} is certified nonnegative on K")
        return EXIT_OK
    print("verification failed: " + ", ".join(names[k] for k in report["failed"]))
    return EXIT_VERIFY


def cmd_check_sparsity(args) -> int:
    p = _load(args.problem)
    try:
        pattern = extract_cliques(p)
    except SparsityError as exc:
        print(f"sparsity analysis failed: {exc}")
        return EXIT_SOLVER
    rip = check_rip(pattern)
    print(pattern.summary())
    if rip.ok:
        print("running intersection property: holds, order " + " ".join(str(i + 1) for i in rip.ordering))
        return EXIT_OK
    inter = ", ".join(f"x{v + 1}" for v in sorted(rip.intersection))
    print(f"running intersection property: fails at clique {rip.violating_clique + 1} (intersection {{{inter}}})")
    return EXIT_SOLVER


def cmd_export(args) -> int:
    from math import comb
    from .sdp.assembly import assemble_by_points, plan_samples

    p = _apply_objective(_load(args.problem), args.objective)
    opts = _options(args)
    try:
        cone, _ = build_relaxation_cone(p, args.order, args.mode, opts)
    except (ConeSizeError, SparsityError, ValueError) as exc:
        print(f"error: {exc}")
        return EXIT_SOLVER
    D = max(cone.degree, p.objective.degree, 2 * args.order if args.mode == "sos" else 1)
    plan = plan_samples(p.n, D, None, args.seed, args.oversample)
    sdp = assemble_by_points(cone, p.objective, plan)
    path = export_sdpa(sdp, args.output)
    print(f"wrote {path} ({sdp.n_constraints} constraints, {len(sdp.blocks)} blocks, "
          f"{comb(p.n + D, p.n)} generic points)")
    return EXIT_OK


# ---------------------------------------------------------------- bench

BENCH_COLUMNS = ["instance", "mode", "order", "reference", "expected", "bound", "gap", "deviation",
                 "status", "verified", "time", "flag"]


@dataclass
class BenchRow:
    label: str
    problem: PmiProblem
    order: int | str
    mode: str
    expected: float | None
    tol: float
    reference: float | None


def _bench_rows(args) -> list[BenchRow]:
    table = args.table
    rows: list[BenchRow] = []
    if table == "ex1":
        k = args.objective or 1
        orders = args.range or sorted(bench.EXAMPLE1_BOUNDS[k])
        p = bench.gen_example1(k)
        tol = 1e-4 if k in (3, 4) else 2e-3
        for m in orders:
            rows.append(BenchRow(f"f{k} m={m}", p, m, args.mode or "mixed",
                                 bench.EXAMPLE1_BOUNDS[k].get(m), tol, 2.0))
    elif table == "ex2":
        variant = args.variant
        orders = args.range or sorted(bench.EXAMPLE2_BOUNDS[variant])
        p = bench.gen_example2(variant)
        tol = 1e-6 if variant == "original" else 5e-3
        for m in orders:
            rows.append(BenchRow(f"{variant} m={m}", p, m, args.mode or "dense",
                                 bench.EXAMPLE2_BOUNDS[variant].get(m), tol, 0.0))
    elif table == "chain":
        ns = args.range or list(range(3, 11))
        order = args.order if args.order is not None else 4
        for n in ns:
            ref = bench.chain_optimum(n).value
            tol = 1e-6 if n == 2 else 1e-3
            expected = bench.CHAIN_TABLE.get(n, ref)
            rows.append(BenchRow(f"n={n}", bench.gen_chain(n), order, args.mode or "sparse", expected, tol, ref))
    elif table == "corrmat":
        qs = args.range or list(range(5, 9))
        mode = args.mode or "dense"
        order = args.order if args.order is not None else ("auto" if mode not in ("sos-tilde",) else 1)
        tol = 2e-3 if mode.startswith("sos") else 1e-3
        for q in qs:
            p = bench.gen_corrmat(q)
            rows.append(BenchRow(f"q={q} n={p.n}", p, order, mode, bench.CORRMAT_TABLE.get(q, p.known_optimum),
                                 tol, p.known_optimum))
    return rows


def _run_row(row: BenchRow, args, runlog: RunLog) -> dict[str, Any]:
    opts = _options(args, verify=not args.no_verify)
    t0 = time.perf_counter()
    out = {"instance": row.label, "mode": row.mode, "reference": row.reference, "expected": row.expected}
    try:
        if row.order == "auto":
            outs = _solve_auto(row.problem, row.mode, opts, args.max_order)
        else:
            outs = [relax(row.problem, row.order, row.mode, opts)]
    except (ConeSizeError, ResourceLimitError) as exc:
        out.update(order=row.order, status="refused", time=time.perf_counter() - t0, flag="", note=str(exc))
        return out
    except Exception as exc:  # noqa: BLE001 - a failing row must not sink the table
        out.update(order=row.order, status="error", time=time.perf_counter() - t0, flag="FAIL", note=str(exc))
        return out
    for o in outs:
        runlog.append(_record(row.problem, o, args.seed))
    last = outs[-1]
    b = last.bound
    out.update(order=last.order, bound=b, status=last.result.status.value, verified=last.verified,
               time=time.perf_counter() - t0)
    if row.reference is not None and math.isfinite(b):
        out["gap"] = row.reference - b
    if row.expected is not None and math.isfinite(b):
        out["deviation"] = b - row.expected
    bad = (row.expected is not None and not (math.isfinite(b) and abs(b - row.expected) <= row.tol))
    out["flag"] = "DEVIATES" if bad or not last.result.status.ok else ""
    return out


def cmd_bench(args) -> int:
    rows = _bench_rows(args)
    runlog = RunLog(args.log)
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(lambda r: _run_row(r, args, runlog), rows))
    else:
        results = [_run_row(r, args, runlog) for r in rows]
    text = format_table(results, BENCH_COLUMNS)
    print(text)
    for r in results:
        if r.get("note"):
            print(f"  {r['instance']}: {r['status']}: {r['note']}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = out_dir / f"bench_{args.table}"
    write_csv(results, BENCH_COLUMNS, stem.with_suffix(".csv"))
    stem.with_suffix(".txt").write_text(text + "\n")
    if args.figure:
        plot_bounds(results, stem.with_suffix(".png"), title=f"{args.table}: computed vs expected")
    if args.print_csv:
        print(to_csv(results, BENCH_COLUMNS), end="")
    deviating = [r for r in results if r.get("flag")]
    print(f"{len(results) - len(deviating)}/{len(results)} rows within tolerance; outputs in {out_dir}")
    return EXIT_SOLVER if deviating else EXIT_OK


# ---------------------------------------------------------------- parser

def _add_solver_flags(sp: argparse.ArgumentParser, *, order_default: Any = 2) -> None:
    sp.add_argument("--mode", choices=MODES, default=None if order_default is None else "dense")
    sp.add_argument("--order", type=_parse_order, default=order_default,
                    help="relaxation order m, or 'auto' to sweep upward")
    sp.add_argument("--max-order", type=int, default=AUTO_MAX_ORDER)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--oversample", type=float, default=1.0)
    sp.add_argument("--max-block-size", type=int, default=4096)
    sp.add_argument("--commutative", action="store_true",
                    help="block mode: keep one word per multiset of letters")
    sp.add_argument("--no-verify", action="store_true")
    sp.add_argument("--log", default="runs.jsonl", help="JSON-lines results log ('' disables)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pmi-relax", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a benchmark problem as JSON")
    g.add_argument("family", choices=["ex1", "ex2", "chain", "corrmat", "random"])
    g.add_argument("--objective", type=int, choices=[1, 2, 3, 4])
    g.add_argument("--variant", choices=["original", "rescaled"], default="original")
    g.add_argument("--n", type=int, default=4)
    g.add_argument("--q", type=int, default=3)
    g.add_argument("--deg", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sparsity", type=int, default=None)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="bound a problem with one relaxation (or an order sweep)")
    s.add_argument("problem")
    _add_solver_flags(s)
    s.add_argument("--objective", help="1-4 for the example1 family, or a JSON polynomial file")
    s.add_argument("--export-sdpa", metavar="PATH")
    s.add_argument("--certificate", metavar="PATH", help="write the certificate JSON here")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="reproduce a benchmark table")
    b.add_argument("table", choices=["ex1", "ex2", "chain", "corrmat"])
    b.add_argument("range", nargs="?", type=_parse_range, default=None,
                   help="orders (ex1, ex2), n (chain) or q (corrmat) as A..B or a comma list")
    _add_solver_flags(b, order_default=None)
    b.add_argument("--objective", type=int, choices=[1, 2, 3, 4])
    b.add_argument("--variant", choices=["original", "rescaled"], default="rescaled")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out-dir", default=".")
    b.add_argument("--figure", action="store_true", help="also render a PNG figure")
    b.add_argument("--print-csv", action="store_true")
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="check a certificate against a problem")
    v.add_argument("certificate")
    v.add_argument("problem")
    v.add_argument("--objective")
    v.add_argument("--psd-tol", type=float, default=1e-7)
    v.add_argument("--identity-tol", type=float, default=1e-6)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("check-sparsity", help="cliques and running intersection check")
    c.add_argument("problem")
    c.set_defaults(func=cmd_check_sparsity)

    e = sub.add_parser("export", help="write the relaxation SDP in SDPA sparse format")
    e.add_argument("problem")
    _add_solver_flags(e)
    e.add_argument("--objective")
    e.add_argument("-o", "--output", required=True)
    e.set_defaults(func=cmd_export)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        if hasattr(args, "log") and args.log == "":
            args.log = None
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
