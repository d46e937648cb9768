"""Command-line driver: reproducible runs with CSV output.

Exit codes: 0 success, 2 solver error, 3 bad arguments.
"""

import argparse
import csv
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, fields
import io
import math
import os
import sys
import time

import numpy as np

from . import __version__, bsop, oracle, spectrum
from .curves import ArcError, ArcSpec, build_arc, endpoint_arc_spec, format_arc, parse_arc

EXIT_OK, EXIT_SOLVER, EXIT_ARGS = 0, 2, 3
THREADS_ENV = "DELTAARC_THREADS"

SOLVER_ERRORS = (spectrum.NoEigenvalueResolved, bsop.ConvergenceError, bsop.RefinementRequired,
                 bsop.AssemblyError, oracle.BoxTooSmall, np.linalg.LinAlgError)


class UsageError(Exception):
    pass


@dataclass
class ExperimentRecord:
    experiment: str
    arc: str
    alpha: float
    L: float
    N: int
    lambda1: float
    kind: str
    kappa_star: float
    est_error: float
    wall_time: object


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _point(text):
    v = _floats(text)
    if len(v) != 2:
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}")
    return tuple(v)


def _linspace(lo, hi, steps):
    if steps < 1:
        raise UsageError("--steps must be >= 1")
    if steps == 1:
        return [float(lo)]
    vals = np.linspace(lo, hi, steps)
    vals[np.abs(vals) <= 1e-12 * max(abs(lo), abs(hi))] = 0.0
    return [float(v) for v in vals]


def _threads():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _map_ordered(fn, items):
    """Apply fn to items, possibly concurrently; results keep input order."""
    n = _threads()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _seed_of(specs):
    seeds = sorted({int(s.param_dict["seed"]) for s in specs if s.family == "rand"})
    return ",".join(map(str, seeds)) if seeds else "none"


def _solve_record(experiment, spec, alpha, N, tol, timing, label=None):
    t0 = time.perf_counter()
    res = spectrum.principal_eigenvalue(spec, alpha, N, tol)
    wall = f"{time.perf_counter() - t0:.3f}" if timing else ""
    return ExperimentRecord(experiment, label or format_arc(spec), alpha, spec.length, N, res.lambda1,
                            res.kind, res.kappa_star, res.est_error, wall)


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_csv(out, argv, config, seed, header, rows):
    out.write(f"# deltaarc {__version__}\n")
    out.write("# command: " + " ".join(argv) + "\n")
    out.write(f"# seed: {seed}\n")
    out.write("# config: " + " ".join(f"{k}={v}" for k, v in sorted(config.items())) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    out.write(buf.getvalue())


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return v


def _records_out(args, argv, config, seed, records, extra_cols=()):
    names = [f.name for f in fields(ExperimentRecord)]
    header = names + [c for c, _ in extra_cols]
    rows = [[getattr(r, n) for n in names] + [vals[i] for _, vals in extra_cols] for i, r in enumerate(records)]
    with _output(args.out) as out:
        _write_csv(out, argv, config, seed, header, rows)


def _checks_out(args, argv, config, seed, checks):
    with _output(args.out) as out:
        _write_csv(out, argv, config, seed, ["check", "value", "tolerance", "pass"], checks)
    return EXIT_OK


def _note(msg):
    print(f"deltaarc: {msg}", file=sys.stderr)


def cmd_eigen(args, argv):
    spec = parse_arc(args.arc)
    rec = _solve_record("eigen", spec, args.alpha, args.N, args.tol, args.timing, args.arc)
    if args.dump_matrix:
        prob = spectrum._Problem(spec, args.N)
        bsop.dump_matrix(prob.matrix(rec.kappa_star), args.dump_matrix)
    config = dict(arc=args.arc, alpha=args.alpha, N=args.N, tol=args.tol)
    _records_out(args, argv, config, _seed_of([spec]), [rec])
    return EXIT_OK


def cmd_sweep_curvature(args, argv):
    values = _linspace(args.min, args.max, args.steps)
    key = {"circ": "c", "sine": "a"}[args.family]
    specs = []
    for v in values:
        p = {key: float(v)} if args.family == "circ" else {key: float(v), "k": args.k}
        specs.append(ArcSpec(args.family, args.L, p))
    for s in specs:
        build_arc(s, max(args.N, 16))
    records = _map_ordered(lambda s: _solve_record("sweep-curvature", s, args.alpha, args.N, args.tol,
                                                   args.timing), specs)
    lam = np.array([r.lambda1 for r in records])
    zero = [i for i, v in enumerate(values) if v == 0.0]
    if zero:
        i0 = zero[0]
        others = np.delete(lam, i0)
        ok = bool(others.size == 0 or np.all(lam[i0] > others))
        _note(f"{key}=0 strict maximum of lambda1: {ok}")
    config = dict(family=args.family, L=args.L, alpha=args.alpha, min=args.min, max=args.max,
                  steps=args.steps, N=args.N, tol=args.tol, k=args.k)
    _records_out(args, argv, config, "none", records, [(key, [float(v) for v in values])])
    return EXIT_OK


def cmd_sweep_endpoints(args, argv):
    bulges = _linspace(args.min, args.max, args.steps)
    specs = [endpoint_arc_spec(args.P, args.Q, float(b)) for b in bulges]
    for s in specs:
        build_arc(s, max(args.N, 16))
    records = _map_ordered(lambda s: _solve_record("sweep-endpoints", s, args.alpha, args.N, args.tol,
                                                   args.timing), specs)
    lam = np.array([r.lambda1 for r in records])
    if 0.0 in bulges:
        i0 = bulges.index(0.0)
        _note(f"bulge=0 strict maximum of lambda1: {bool(np.all(np.delete(lam, i0) < lam[i0]))}")
    config = dict(P=args.P, Q=args.Q, min=args.min, max=args.max, steps=args.steps, alpha=args.alpha,
                  N=args.N, tol=args.tol)
    _records_out(args, argv, config, "none", records,
                 [("bulge", [float(b) for b in bulges]), ("length", [s.length for s in specs])])
    return EXIT_OK


def cmd_robin_check(args, argv):
    alpha, L, N = args.alpha, args.L, args.N
    seg = ArcSpec("segment", L)
    prob = spectrum._Problem(seg, N)
    kappa = 1.0 / L
    Q = prob.matrix(kappa)
    Qh = spectrum.halfplane_neumann_Q(L, kappa, N)
    qnorm = float(np.linalg.norm(Q.Q, 2))
    doubling = float(np.max(np.abs(Qh.Q - 2.0 * Q.Q))) / qnorm
    robin = spectrum.robin_segment_eigenvalue(alpha, L, N, args.tol, estimate_error=False)
    half = spectrum.robin_halfplane_eigenvalue(alpha, L, N, args.tol)
    rel = abs(half.lambda1 - robin.lambda1) / abs(robin.lambda1)
    curved = parse_arc(args.curved_arc)
    if abs(curved.length - L) > 1e-12 * L:
        raise UsageError("--curved-arc must have the same length L")
    lam_curved = spectrum.principal_eigenvalue(curved, 2.0 * alpha, N, args.tol, estimate_error=False).lambda1
    checks = [
        ["halfplane_doubling_rel", doubling, 1e-15, doubling <= 1e-15],
        ["mu1_segment_halfplane", half.lambda1, "", ""],
        ["lambda1_2alpha_segment", robin.lambda1, "", ""],
        ["robin_identity_rel", rel, 1e-9, rel <= 1e-9],
        ["lambda1_2alpha_curved(upper bound for mu1 curved)", lam_curved, "", ""],
        ["chain_curved_below_segment", robin.lambda1 - lam_curved, 0.0, lam_curved < robin.lambda1],
    ]
    config = dict(alpha=alpha, L=L, N=N, tol=args.tol, curved_arc=args.curved_arc)
    return _checks_out(args, argv, config, _seed_of([curved]), checks)


def cmd_oracle_compare(args, argv):
    alpha, L = args.alpha, args.L
    bs = spectrum.principal_eigenvalue(ArcSpec("segment", L), alpha, args.N, args.tol)
    rows = [["bs_lambda1", bs.lambda1, "", ""], ["bs_est_error", bs.est_error, "", ""]]
    errs = []
    for h in (args.h, args.h / 2):
        fd = oracle.fd_principal_eigenvalue(oracle.FDConfig(L, alpha, h, args.A), check_box=False,
                                            solver=args.solver)
        rel = abs(fd - bs.lambda1) / abs(bs.lambda1)
        errs.append(rel)
        rows.append([f"fd_lambda1(h={h:g})", fd, "", ""])
        rows.append([f"rel_disagreement(h={h:g})", rel, 0.01, rel <= 0.01])
    rows.append(["disagreement_ratio", errs[0] / errs[1], 2.0, errs[0] / errs[1] >= 2.0])
    box = oracle.fd_lowest_eigenvalues(oracle.FDConfig(L, 0.0, args.h, args.A), 1, check_box=False,
                                       sectors=[("even", "even")], solver=args.solver)[0]
    exact = oracle.box_ground_energy(args.A)
    rows.append(["box_alpha0_rel", abs(box - exact) / exact, "O(h^2)", ""])
    rows.append(["box_decay_margin_A_kappa", args.A * bs.kappa_star, 4.0, args.A * bs.kappa_star >= 4.0])
    config = dict(alpha=alpha, L=L, N=args.N, h=args.h, A=args.A, tol=args.tol, solver=args.solver)
    return _checks_out(args, argv, config, "none", rows)


def cmd_convergence(args, argv):
    spec = parse_arc(args.arc)
    runs = []
    for n in args.N_list:
        prob = spectrum._Problem(spec, n)
        kappa, _, f_star, _ = spectrum._solve(prob, args.alpha, args.tol)
        runs.append((n, kappa, f_star))
    ref = runs[-1][1] ** 2
    rows = []
    prev = None
    for n, kappa, f_star in runs:
        err = abs(kappa ** 2 - ref)
        ratio = prev / err if prev is not None and err > 0 else ""
        rows.append([n, -kappa ** 2, kappa, f_star, abs(f_star - 1.0) <= args.tol, err, ratio])
        prev = err
    config = dict(arc=args.arc, alpha=args.alpha, N_list=",".join(map(str, args.N_list)), tol=args.tol)
    with _output(args.out) as out:
        _write_csv(out, argv, config, _seed_of([spec]),
                   ["N", "lambda1", "kappa_star", "F_star", "F_within_tol", "err_vs_finest", "err_ratio"], rows)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="deltaarc", description="Principal eigenvalues of delta-interactions on open arcs.")
    p.add_argument("--version", action="version", version=f"deltaarc {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, N=spectrum.DEFAULT_N):
        sp.add_argument("--alpha", type=float, default=1.0)
        sp.add_argument("--N", type=int, default=N)
        sp.add_argument("--tol", type=float, default=spectrum.DEFAULT_TOL_F, help="tolerance on |F - 1|")
        sp.add_argument("--out", default=None, help="CSV path (default stdout)")
        sp.add_argument("--no-timing", dest="timing", action="store_false",
                        help="leave wall_time empty for byte-identical output")

    sp = sub.add_parser("eigen", help="principal eigenvalue of one arc")
    sp.add_argument("--arc", required=True)
    sp.add_argument("--dump-matrix", default=None, help="write the BS matrix at kappa* (BSQ1 format)")
    common(sp)
    sp.set_defaults(func=cmd_eigen)

    sp = sub.add_parser("sweep-curvature", help="lambda1 versus curvature at fixed length")
    sp.add_argument("--family", choices=["circ", "sine"], default="circ")
    sp.add_argument("--L", type=float, default=1.0)
    sp.add_argument("--min", type=float, default=0.0)
    sp.add_argument("--max", type=float, default=4.0)
    sp.add_argument("--steps", type=int, default=9)
    sp.add_argument("--k", type=float, default=1.0, help="sine family wavenumber")
    common(sp)
    sp.set_defaults(func=cmd_sweep_curvature)

    sp = sub.add_parser("sweep-endpoints", help="lambda1 versus bulge at fixed endpoints")
    sp.add_argument("--P", type=_point, default=(0.0, 0.0))
    sp.add_argument("--Q", type=_point, default=(1.0, 0.0))
    sp.add_argument("--min", type=float, default=-0.4)
    sp.add_argument("--max", type=float, default=0.4)
    sp.add_argument("--steps", type=int, default=9)
    common(sp)
    sp.set_defaults(func=cmd_sweep_endpoints)

    sp = sub.add_parser("robin-check", help="Robin slit identity for the segment")
    sp.add_argument("--L", type=float, default=1.0)
    sp.add_argument("--curved-arc", default=None, help="curved arc for the inequality chain (default circ:c=2/L)")
    common(sp)
    sp.set_defaults(func=cmd_robin_check)

    sp = sub.add_parser("oracle-compare", help="BS solver versus finite differences")
    sp.add_argument("--L", type=float, default=2.0)
    sp.add_argument("--h", type=float, default=1.0 / 32)
    sp.add_argument("--A", type=float, default=12.0)
    sp.add_argument("--solver", choices=["auto", "shift-invert", "amg"], default="auto")
    common(sp)
    sp.set_defaults(func=cmd_oracle_compare)

    sp = sub.add_parser("convergence", help="N-refinement study")
    sp.add_argument("--arc", required=True)
    sp.add_argument("--N-list", dest="N_list", type=_ints, default=[128, 256, 512, 1024])
    common(sp)
    sp.set_defaults(func=cmd_convergence)
    return p


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits for --help/--version (0) and usage errors (3)
        return exc.code if isinstance(exc.code, int) else EXIT_ARGS
    if getattr(args, "command", None) == "robin-check" and args.curved_arc is None:
        args.curved_arc = f"circ:L={args.L!r},c={2.0 / args.L!r}"
    try:
        for name in ("alpha", "tol", "L", "h", "A"):
            v = getattr(args, name, None)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise UsageError(f"--{name} must be positive")
        if getattr(args, "N", 1) < 1:
            raise UsageError("--N must be >= 1")
        return args.func(args, ["deltaarc"] + argv)
    except SOLVER_ERRORS as exc:
        _note(f"solver error: {exc}")
        return EXIT_SOLVER
    except (UsageError, ArcError, ValueError, TypeError) as exc:
        _note(f"error: {exc}")
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
