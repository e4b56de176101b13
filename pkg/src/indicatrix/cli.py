"""Command-line interface.

Exit codes: 0 success, 1 bad input (parse errors, usage, unsupported
dimension), 2 strong convexity fails, 3 no violation or a certificate not
reproduced on recheck, 4 numerical trust or optimizer failure.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import dsl
from .config import ToleranceConfig
from .geometry import OptimizerError, sample_indicatrix
from .jets import DomainError
from .norms import NormFileError, read_norm_file
from .plot import PlotSpec, UnsupportedDimensionError, render_svg
from .search import (
    MATSUMOTO,
    ConvexityAuditError,
    NumericalTrustError,
    certificates_to_json,
    certify,
    dumps,
    load_certificates,
    scan,
)
from .tensor import ConvexityError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONVEXITY = 2
EXIT_NO_VIOLATION = 3
EXIT_TRUST = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def parse_vector(text: str) -> np.ndarray:
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}") from None
    if len(values) < 2 or not all(math.isfinite(v) for v in values):
        raise argparse.ArgumentTypeError(f"expected at least 2 finite reals, got {text!r}")
    return np.array(values)


def parse_tolerance(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance value in {text!r}") from None


def _tolerances(args) -> ToleranceConfig:
    overrides = dict(args.tol or [])
    try:
        return ToleranceConfig().with_overrides(**overrides)
    except TypeError:
        raise UsageError(f"unknown tolerance in {sorted(overrides)}") from None


def _fmt(v) -> str:
    return "(" + ", ".join(f"{x:.6g}" for x in v) + ")"


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="indicatrix", description="Indicatrix geometry of Finsler norms.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--tol", action="append", type=parse_tolerance, metavar="NAME=VALUE",
                       help="override a tolerance, e.g. certify_tol=1e-7")

    p = sub.add_parser("audit", help="check strong convexity on a direction grid")
    p.add_argument("norm_file")
    p.add_argument("--resolution", type=int, default=360)
    p.add_argument("--csv", metavar="PATH", help="write the indicatrix sample as CSV")
    common(p)

    p = sub.add_parser("scan", help="search for violations of both inequalities")
    p.add_argument("norm_file")
    p.add_argument("--resolution", type=int, default=360)
    p.add_argument("--restarts", type=int, help="multistart count (default 16 for n=2, 64 for n=3)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="certificates.json", metavar="PATH")
    p.add_argument("--report", metavar="PATH", help="write the full scan report as JSON")
    p.add_argument("--svg", metavar="PATH", help="plot the best Matsumoto witness")
    common(p)

    p = sub.add_parser("certify", help="certify one (y, xi) pair, or recheck saved certificates")
    p.add_argument("norm_file", nargs="?")
    p.add_argument("--y", type=parse_vector)
    p.add_argument("--xi", type=parse_vector)
    p.add_argument("--recheck", metavar="CERTIFICATES")
    common(p)

    p = sub.add_parser("plot", help="draw the indicatrix and the osculating ellipse at y")
    p.add_argument("norm_file")
    p.add_argument("--y", type=parse_vector, required=True)
    p.add_argument("--xi", type=parse_vector)
    p.add_argument("--out", default="figure.svg", metavar="PATH")
    p.add_argument("--size", type=int, default=480)
    common(p)
    return parser


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _report_failures(sample, out):
    for k in sample.failures:
        angle = ", ".join(f"{a:.6f}" for a in sample.angles[k])
        print(f"  direction {k}: angle ({angle}), point {_fmt(sample.points[k])}, "
              f"min eigenvalue {sample.min_eigenvalues[k]:.3e}", file=out)
    for k, message in sample.defects:
        print(f"  direction {k}: {message}", file=out)


def cmd_audit(args) -> int:
    tol = _tolerances(args)
    norm = read_norm_file(args.norm_file)
    sample = sample_indicatrix(norm, args.resolution, tol)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            sample.to_csv(fh)
    eigs = sample.min_eigenvalues
    print(f"resolution {sample.resolution}, dimension {sample.dimension}")
    print(f"min eigenvalue of g: {np.nanmin(eigs):.6g} (median {np.nanmedian(eigs):.6g}, max {np.nanmax(eigs):.6g})")
    print(f"max |F - 1| on samples: {np.nanmax(np.abs(sample.residuals)):.3g}")
    if sample.strongly_convex:
        print("strongly convex at every grid direction")
        return EXIT_OK
    print(f"strong convexity FAILS at {sample.failures.size} grid direction(s):")
    _report_failures(sample, sys.stdout)
    return EXIT_CONVEXITY


def cmd_scan(args) -> int:
    tol = _tolerances(args)
    norm = read_norm_file(args.norm_file)
    try:
        report = scan(norm, args.resolution, args.restarts, seed=args.seed, tol=tol)
    except ConvexityAuditError as exc:
        print(f"audit failed: {exc}", file=sys.stderr)
        _report_failures(exc.sample, sys.stderr)
        return EXIT_CONVEXITY
    print(report.summary())
    _write(args.out, certificates_to_json(report.certificates))
    if args.report:
        _write(args.report, dumps(report.to_dict()))
    if args.svg and norm.dimension == 2:
        witness = report.certificate(MATSUMOTO)
        y = witness.y if witness is not None else report.points[0].y
        xi = witness.xi if witness is not None else None
        _write(args.svg, render_svg(PlotSpec(norm, y, xi=xi), tol))
    return EXIT_OK


def _recheck(args, tol) -> int:
    with open(args.recheck, encoding="utf-8") as fh:
        certificates = load_certificates(fh.read())
    status = EXIT_OK
    for i, c in enumerate(certificates):
        again = certify(c.norm, c.y, c.xi, c.tolerances)
        same = again.direction == c.direction and abs(again.margin - c.margin) <= 1e-9
        print(f"certificate {i}: {c.direction} margin {c.margin:.12g} -> "
              f"{again.direction or 'no violation'} margin {again.margin:.12g}: "
              f"{'reproduced' if same else 'NOT reproduced'}")
        if not same:
            status = EXIT_NO_VIOLATION
    return status


def cmd_certify(args) -> int:
    tol = _tolerances(args)
    if args.recheck:
        return _recheck(args, tol)
    if args.norm_file is None or args.y is None or args.xi is None:
        raise UsageError("certify needs NORM_FILE, --y and --xi (or --recheck FILE)")
    norm = read_norm_file(args.norm_file)
    for name, v in (("y", args.y), ("xi", args.xi)):
        if v.size != norm.dimension:
            raise UsageError(f"--{name} has {v.size} components, norm has dimension {norm.dimension}")
    result = certify(norm, args.y, args.xi, tol)
    sys.stdout.write(dumps(result.to_dict()))
    return EXIT_OK if result.is_violation else EXIT_NO_VIOLATION


def cmd_plot(args) -> int:
    tol = _tolerances(args)
    norm = read_norm_file(args.norm_file)
    spec = PlotSpec(norm, args.y, size=args.size, xi=args.xi)
    _write(args.out, render_svg(spec, tol))
    print(f"wrote {args.out}")
    return EXIT_OK


COMMANDS = {"audit": cmd_audit, "scan": cmd_scan, "certify": cmd_certify, "plot": cmd_plot}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except dsl.DslSyntaxError as exc:
        print(f"syntax error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NormFileError, dsl.DslError, UnsupportedDimensionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalTrustError as exc:
        print(f"numerical trust error: {exc}", file=sys.stderr)
        return EXIT_TRUST
    except ConvexityError as exc:
        print(f"convexity error: {exc}", file=sys.stderr)
        return EXIT_CONVEXITY
    except OptimizerError as exc:
        print(f"optimizer error: {exc}", file=sys.stderr)
        return EXIT_TRUST
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
