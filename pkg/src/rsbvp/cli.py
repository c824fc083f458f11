"""Command-line front end.

Exit codes:
    0   success (for certify: the contraction check passed)
    1   any other error (an expression left its domain, unreadable CSV, ...)
    2   the contraction check failed, or solve refused an uncertified run
    3   a standing hypothesis fails (vanishing a_n or Wronskian, singular boundary matrix)
    4   an iteration did not converge
    64  usage or problem-file error
    65  CSV does not match the problem's order or grid
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .certify import certify
from .errors import (
    CertificateFailed,
    ExprSyntaxError,
    HypothesisViolation,
    NonConvergenceError,
    ProblemFileError,
    RsbvpError,
    ShapeMismatchError,
)
from .funcspace import read_csv, sup_norm, write_csv
from .problem import FIXTURE_DIR, fixture_path, load_problem
from .report import dump_toml
from .solver import residual, solve_full

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2
EXIT_HYPOTHESIS = 3
EXIT_NONCONVERGENCE = 4
EXIT_USAGE = 64
EXIT_SHAPE = 65


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load(args):
    src = args.file
    if src.startswith("fixture:"):
        try:
            src = fixture_path(src[len("fixture:"):])
        except FileNotFoundError as exc:
            raise ProblemFileError(str(exc)) from None
    spec = load_problem(src)
    probes = args.probes
    if probes is None and args.grid is not None:
        probes = min(spec.probes, args.grid)
    return spec.with_numerics(m=args.grid, tol=args.tol, seed=args.seed, probes=probes)


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_certify(args) -> int:
    spec = _load(args)
    cert = certify(spec)
    _emit(cert.to_toml(), args.output)
    if args.output:
        print(f"contraction = {cert.contraction}  existence = {cert.existence}  q = {cert.q:.17g}")
    return EXIT_OK if cert.passed else EXIT_FAIL


def _report_doc(spec, cert, rep, status, x):
    res = residual(spec, x)
    doc = {
        "status": status,
        "problem": spec.name,
        "seed": spec.seed,
        "grid_m": spec.m,
        "tol": spec.tol,
    }
    run = {
        "converged": rep is not None and rep.converged,
        "outer_iterations": rep.iterations if rep else None,
        "inner_iterations": rep.inner_iterations if rep else None,
        "fixed_point_residuals": list(rep.increments) if rep else None,
        "damping": list(rep.damping) if rep and rep.damping else None,
        "solution_sup_norm": sup_norm(x),
        "ode_residual": res.ode,
        "bc_residual": res.bc,
        "ode_residual_t": res.t_max,
        "derivative_consistency": res.consistency,
    }
    doc["run"] = run
    if cert is not None:
        cdoc = cert.to_dict()
        doc["certificate"] = {**cdoc["constants"], **cdoc["verdicts"]}
    return doc


def cmd_solve(args) -> int:
    spec = _load(args)
    if args.anderson is not None:
        spec = spec.with_numerics(anderson=args.anderson)
    out = Path(args.output)
    report_path = out.with_suffix(".report.toml")
    cert = certify(spec)
    certified = cert.contraction == "pass" and cert.existence == "pass"
    if not certified and not args.force:
        print(
            f"refusing to solve: contraction = {cert.contraction}, existence = {cert.existence}; "
            "pass --force for an empirical run",
            file=sys.stderr,
        )
        return EXIT_FAIL
    q = cert.q if cert.contraction == "pass" else None
    ball = cert.m if certified else None
    status = "certified" if certified else "uncertified"
    if certified and cert.ball.empirical:
        status = "certified-empirical-ball"
    try:
        rep = solve_full(spec, q, ball=ball)
    except NonConvergenceError as exc:
        banner = f"WARNING: not converged; partial iterate only\n{exc}"
        print(banner, file=sys.stderr)
        if exc.partial is not None:
            write_csv(exc.partial, out, banner=banner)
            doc = _report_doc(spec, cert, None, status + "-not-converged", exc.partial)
            doc["run"]["fixed_point_residuals"] = list(exc.history)
            doc["run"]["message"] = str(exc)
            report_path.write_text(dump_toml(doc), encoding="utf-8")
        return EXIT_NONCONVERGENCE
    write_csv(rep.solution, out)
    doc = _report_doc(spec, cert, rep, status, rep.solution)
    report_path.write_text(dump_toml(doc), encoding="utf-8")
    run = doc["run"]
    print(f"status = {status}")
    print(f"outer_iterations = {rep.iterations}")
    print(f"ode_residual = {run['ode_residual']:.17g}")
    print(f"bc_residual = {run['bc_residual']:.17g}")
    print(f"wrote {out} and {report_path}")
    return EXIT_OK


def cmd_mms(args) -> int:
    from .mms import MMS_GRIDS, mms_study

    spec = _load(args)
    grids = MMS_GRIDS if args.grids is None else tuple(int(g) for g in args.grids.split(","))
    res = mms_study(spec, args.exact, grids)
    text = res.table()
    _emit(text, args.output)
    print(f"order = {res.order:.17g}")
    return EXIT_OK


def cmd_residual(args) -> int:
    spec = _load(args)
    x = read_csv(args.csv, grid=spec.grid, order=spec.n)
    res = residual(spec, x)
    print(f"ode_residual = {res.ode:.17g}")
    print(f"ode_residual_t = {res.t_max:.17g}")
    print(f"bc_residual = {res.bc:.17g}")
    print(f"derivative_consistency = {res.consistency:.17g}")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    for p in sorted(FIXTURE_DIR.glob("*.toml")):
        print(p.stem)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="rsbvp",
        description="Certify and solve nonlinear boundary value problems with Riemann-Stieltjes "
                    "boundary conditions.",
        epilog=__doc__[__doc__.index("Exit codes:"):],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"rsbvp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress")
    common = _Parser(add_help=False)
    common.add_argument("file", help="problem file (TOML), or fixture:<name> for a packaged one")
    common.add_argument("--grid", type=int, metavar="M", help="number of grid nodes")
    common.add_argument("--tol", type=float, metavar="T", help="iteration tolerance")
    common.add_argument("--seed", type=int, metavar="S", help="seed for all sampling")
    common.add_argument("--probes", type=int, metavar="P", help="Green's-function probe count")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("certify", parents=[common], help="compute the existence certificate")
    p.add_argument("-o", "--output", help="write the certificate here instead of stdout")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("solve", parents=[common], help="solve and write a solution CSV")
    p.add_argument("-o", "--output", required=True, help="solution CSV path")
    p.add_argument("--force", action="store_true", help="run even without a passing certificate")
    p.add_argument("--anderson", type=int, metavar="W", help="Anderson window (0 = off)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("mms", parents=[common], help="manufactured-solution convergence study")
    p.add_argument("--exact", required=True, help="exact solution as an expression in t")
    p.add_argument("--grids", help="comma-separated grid sizes (default 101,201,401,801)")
    p.add_argument("-o", "--output", help="write the error table here instead of stdout")
    p.set_defaults(func=cmd_mms)

    p = sub.add_parser("residual", parents=[common], help="residuals of a solution CSV")
    p.add_argument("csv", help="solution CSV")
    p.set_defaults(func=cmd_residual)

    p = sub.add_parser("fixtures", help="list packaged problem files")
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except (ProblemFileError, ExprSyntaxError) as exc:
        print(f"problem file error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ShapeMismatchError as exc:
        print(f"shape mismatch: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except HypothesisViolation as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except NonConvergenceError as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except CertificateFailed as exc:
        print(f"certificate failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (RsbvpError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
