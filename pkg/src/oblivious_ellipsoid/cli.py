"""Command-line front end.

Exit codes: 0 feasible, 1 infeasible with certificate, 2 infeasibility
declared without certificate, 3 iteration limit, 4 input error.
``certify`` exits 0 for a valid certificate and 1 for an invalid one.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io as oio
from .bench import ALGORITHMS, SweepConfig, rows_to_csv, run_sweep, solve, summary_table
from .certificates import TypeLCertificate, verify_type_l
from .errors import ImmediateInfeasible, OEAError
from .problem import GENERATOR_KINDS, gen_instance
from .solver import DECLARED, FEASIBLE, TYPE_L, SolverConfig

EXIT_INPUT = 4
log = logging.getLogger("oblivious_ellipsoid")


def _positive(kind):
    def parse(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return parse


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oea", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--tol-feas", type=_positive(float), default=1e-9)
        p.add_argument("--max-iter", type=_positive(int), default=None)
        p.add_argument("--tau", type=_positive(float), default=None,
                       help="condition measure, only used to fill the phi trace column")

    p = sub.add_parser("solve", help="solve a problem file")
    p.add_argument("problem")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="oea")
    p.add_argument("--trace", metavar="CSV", help="write the per-iteration trace")
    p.add_argument("--sidecar", metavar="BIN",
                   help="oea-mm only: write the certificate-index sequence")
    solver_flags(p)

    p = sub.add_parser("certify", help="re-verify a certificate against a problem")
    p.add_argument("problem")
    p.add_argument("certificate")
    p.add_argument("--tol", type=_positive(float), default=1e-8)

    p = sub.add_parser("generate", help="write a generated instance")
    p.add_argument("--kind", choices=GENERATOR_KINDS, default="feasible-box")
    p.add_argument("--n", type=_positive(int), default=2)
    p.add_argument("--m-hat", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gap", type=_positive(float), default=None)
    p.add_argument("--pairs", type=_positive(int), default=1)
    p.add_argument("--no-pad", action="store_true", help="emit bare opposing pairs")
    p.add_argument("-o", "--output", help="file to write (default stdout)")

    p = sub.add_parser("bench", help="run a seeded benchmark sweep")
    p.add_argument("--kind", choices=GENERATOR_KINDS, default="feasible-box")
    p.add_argument("--n", type=int, nargs="+", default=[2, 3])
    p.add_argument("--m-hat", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--seeds", type=_positive(int), default=5, help="number of seeds")
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--algorithm", choices=ALGORITHMS, nargs="+", default=["oea", "seap"])
    p.add_argument("--workers", type=_positive(int), default=1)
    p.add_argument("--out", metavar="CSV", help="write rows here (default stdout)")
    p.add_argument("--summary", metavar="TXT", help="write the summary table here")
    solver_flags(p)
    return ap


def _config(args) -> SolverConfig:
    return SolverConfig(tol_feas=args.tol_feas, max_iter=args.max_iter, tau=args.tau)


def _emit(doc) -> None:
    sys.stdout.write(oio.dumps(doc))


def cmd_solve(args) -> int:
    try:
        inst = oio.parse_problem(args.problem)
    except ImmediateInfeasible as exc:
        log.info("box bounds already certify infeasibility")
        if args.algorithm == "oea-no-alt":
            _emit(oio.DECLARED_DOC)
            return 2
        cert = TypeLCertificate.from_vector(exc.problem, exc.certificate)
        _emit(oio.certificate_to_dict(exc.problem, cert))
        return 1
    out = solve(args.algorithm, inst, _config(args))
    if args.trace:
        oio.write_trace(out.trace, args.trace, side_column=args.algorithm == "seap")
    if args.sidecar and out.seq is not None:
        out.seq.write(args.sidecar)
    if out.kind == FEASIBLE:
        _emit(oio.feasible_to_dict(out.x))
    elif out.kind == TYPE_L:
        _emit(oio.certificate_to_dict(inst.problem, out.certificate))
    elif out.kind == DECLARED:
        _emit(oio.DECLARED_DOC)
    else:
        _emit({"status": "iteration-limit", "iterations": out.iterations})
    log.info("%s after %d iterations", out.kind, out.iterations)
    return out.exit_code


def cmd_certify(args) -> int:
    try:
        problem = oio.parse_problem(args.problem).problem
    except ImmediateInfeasible as exc:
        problem = exc.problem
    lam = oio.parse_certificate(args.certificate, problem.m)
    rep = verify_type_l(problem, lam, tol=args.tol)
    _emit({"valid": rep.passed, "residuals": rep.as_dict()})
    return 0 if rep.passed else 1


def cmd_generate(args) -> int:
    inst = gen_instance(args.kind, args.n, args.m_hat, args.seed, gap=args.gap,
                        pairs=args.pairs, pad=not args.no_pad)
    text = oio.write_instance(inst)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    sweep = SweepConfig(kind=args.kind, ns=tuple(args.n), m_hats=tuple(args.m_hat),
                        seeds=tuple(range(args.seed, args.seed + args.seeds)),
                        algorithms=tuple(args.algorithm), workers=args.workers,
                        solver=_config(args))
    rows = run_sweep(sweep)
    text = rows_to_csv(rows)
    table = summary_table(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.summary:
        Path(args.summary).write_text(table)
    sys.stderr.write(table)
    return 0


COMMANDS = {"solve": cmd_solve, "certify": cmd_certify, "generate": cmd_generate,
            "bench": cmd_bench}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OEAError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
