"""Command line entry point: ``interlab analyze | simulate | profile``."""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import report as rpt
from .anova import analyze
from .ingest import BalanceError, IngestError, ParseError, TransformError, TransformSpec, load_dataset
from .model import DegenerateDesignError, design_stats
from .sim import (
    ModelParams,
    NullViolationError,
    SimConfig,
    monte_carlo_estimators,
    monte_carlo_mean_squares,
    null_rejection_rate,
    reference_design,
    power_curve,
    replicate_statistics,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_CHECK_FAILED = 3

_RESPONSE = {"ln": "natural_log", "log10": "log10", "none": "identity"}
_DOSE = {"log10": "log10", "none": "identity"}


def _err(msg: str) -> None:
    print(f"interlab: {msg}", file=sys.stderr)


def cmd_analyze(args) -> int:
    spec = TransformSpec(
        dose_transform=_DOSE[args.dose_transform],
        center_doses=args.center,
        response_transform=_RESPONSE[args.response_transform],
    )
    try:
        data = load_dataset(args.file, spec)
    except (BalanceError, TransformError) as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    except ParseError as exc:
        _err(str(exc))
        return EXIT_IO
    except IngestError as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    if not 0.0 < args.alpha < 1.0:
        _err("--alpha must lie in (0, 1)")
        return EXIT_VALIDATION

    analysis = analyze(data, alpha=args.alpha)
    report = rpt.build_report(analysis, spec, source=str(args.file))
    sys.stdout.write(rpt.render_text(report))
    for w in analysis.warnings:
        _err(f"warning: {w}")
    if args.json:
        try:
            with open(args.json, "w", encoding="utf-8") as fh:
                fh.write(rpt.dumps(report))
        except OSError as exc:
            _err(f"{args.json}: cannot write report ({exc.strerror})")
            return EXIT_IO
    return EXIT_OK


def _read_design_file(path) -> list[float]:
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            for tok in line.replace(",", " ").split():
                try:
                    values.append(float(tok))
                except ValueError:
                    raise ParseError(f"cannot parse dose {tok!r}", path, lineno) from None
    return values


def _sim_design(args):
    if args.design_file:
        x = _read_design_file(args.design_file)
    elif args.x:
        x = list(args.x)
    else:
        return reference_design(args.m, args.per_dose or 5)
    x = np.repeat(x, args.per_dose or 1)
    if args.center:
        x = x - math.fsum(x) / len(x)
    return design_stats(x, args.m)


def _print_estimates(title, est, k):
    print(title)
    print(f"{'quantity':<14}{'empirical':>14}{'SE':>12}{'theory':>14}{'z':>9}  within {k:g} SE")
    ok = True
    for name, e in est.items():
        within = e.within(k)
        ok &= within
        print(f"{name:<14}{e.mean:>14.6g}{e.se:>12.4g}{e.theory:>14.6g}{e.z:>9.2f}  {'yes' if within else 'NO'}")
    return ok


def cmd_simulate(args) -> int:
    try:
        if args.m < 2:
            raise ValueError("--m must be at least 2")
        params = ModelParams(args.a0, args.b0, args.sigma_a, args.sigma_b, args.sigma_e)
        cfg = SimConfig(_sim_design(args), params, args.reps, args.seed)
    except ParseError as exc:
        _err(str(exc))
        return EXIT_IO
    except OSError as exc:
        _err(f"{args.design_file}: {exc.strerror}")
        return EXIT_IO
    except (ValueError, DegenerateDesignError) as exc:
        _err(str(exc))
        return EXIT_VALIDATION

    d = cfg.design
    print(f"Design: m = {d.m}, n = {d.n}, S_xxL = {d.S_xxL:.6g}, replicates = {cfg.replications}, seed = {cfg.seed}")
    print(f"Parameters: a0 = {params.a0:g}, b0 = {params.b0:g}, sigma_A = {params.sigma_A:g}, "
          f"sigma_B = {params.sigma_B:g}, sigma_E = {params.sigma_E:g}")
    print()
    k = args.band
    ok = True
    try:
        if args.mode == "mean-squares":
            if cfg.replications < 100:
                raise ValueError("mean-squares mode needs --reps >= 100")
            stats = replicate_statistics(cfg, args.workers)
            ok &= _print_estimates("Mean squares", {f"V_{f}": e for f, e in
                                   monte_carlo_mean_squares(cfg, stats=stats).items()}, k)
            print()
            ok &= _print_estimates("Estimators", monte_carlo_estimators(cfg, stats=stats), k)
        elif args.mode == "size":
            res = null_rejection_rate(cfg, args.test, args.alpha, args.workers)
            within = res.within(k)
            ok &= within
            print(f"test = {res.test}, alpha = {res.alpha:g}")
            print(f"rejection rate = {res.rate:.4f}, band = {res.alpha:g} +/- {k * res.se:.4f}  "
                  f"{'within' if within else 'OUTSIDE'}")
        else:
            grid = args.sigma_b_grid or [0.0, 0.2, 0.4, 0.8]
            curve = power_curve(cfg, grid, args.test, args.alpha, args.workers)
            print(f"test = {args.test}, alpha = {args.alpha:g}")
            print(f"{'sigma_B':>10}{'rate':>10}{'SE':>10}")
            for sb, res in curve:
                print(f"{sb:>10g}{res.rate:>10.4f}{res.se:>10.4f}")
            for (_, lo), (_, hi) in zip(curve, curve[1:]):
                if hi.rate < lo.rate - max(lo.se, hi.se):
                    ok = False
            print("monotone (1 SE slack): " + ("yes" if ok else "NO"))
    except NullViolationError as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    except ValueError as exc:
        _err(str(exc))
        return EXIT_VALIDATION

    if args.check and not ok:
        _err("simulation check failed")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_profile(args) -> int:
    try:
        report = rpt.load_report(args.report)
    except rpt.ReportError as exc:
        _err(str(exc))
        return EXIT_IO
    comp = report["components"]
    s2a = float(comp["sigma2_A"]["truncated"])
    s2b = float(comp["sigma2_B"]["truncated"])
    design_x = [float(v) for v in report["study"]["x"]]

    points = []
    if not args.no_design:
        points.extend(sorted(set(design_x)))
    points.extend(args.x or [])
    out = sys.stdout
    out.write("x,tau2\n")
    for x in points:
        out.write(f"{x!r},{s2a + x * x * s2b!r}\n")
    avg = math.fsum(s2a + x * x * s2b for x in design_x) / len(design_x)
    out.write(f"# design_average,{avg!r},sigma2_L,{float(comp['sigma2_L']['truncated'])!r}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="interlab",
        description="Precision of linear dose-response measurement methods from interlaboratory studies.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="ANOVA, F-tests and precision estimates for a study CSV")
    a.add_argument("file", help="CSV with header lab,dose,response")
    a.add_argument("--response-transform", choices=sorted(_RESPONSE), default="ln")
    a.add_argument("--dose-transform", choices=sorted(_DOSE), default="log10")
    a.add_argument("--center", action=argparse.BooleanOptionalAction, default=True,
                   help="center the dose vector (default: on)")
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--json", metavar="FILE", help="write the full-precision report here")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="Monte Carlo checks of the mean squares and tests")
    s.add_argument("--mode", choices=["mean-squares", "size", "power"], default="mean-squares")
    s.add_argument("--m", type=int, default=5, help="number of laboratories")
    s.add_argument("--x", type=float, action="append",
                   help="design dose (repeatable); default is the four-level design used in the bundled examples")
    s.add_argument("--design-file", help="file of design doses, whitespace or comma separated")
    s.add_argument("--per-dose", type=int, help="replicates of each listed dose")
    s.add_argument("--center", action=argparse.BooleanOptionalAction, default=True)
    s.add_argument("--a0", type=float, default=0.0)
    s.add_argument("--b0", type=float, default=1.0)
    s.add_argument("--sigma-a", type=float, default=0.5)
    s.add_argument("--sigma-b", type=float, default=0.3)
    s.add_argument("--sigma-e", type=float, default=0.2)
    s.add_argument("--test", choices=["regression", "intercepts", "slopes"], default="slopes")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--sigma-b-grid", type=float, nargs="+")
    s.add_argument("--reps", type=int)
    s.add_argument("--seed", type=int, default=20240611)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--band", type=float, default=3.0, help="tolerance band in standard errors")
    s.add_argument("--check", action="store_true", help="exit 3 if any band check fails")
    s.set_defaults(func=cmd_simulate)

    pr = sub.add_parser("profile", help="tau2(x) as CSV from a saved analyze report")
    pr.add_argument("report", help="JSON file written by analyze --json")
    pr.add_argument("--x", type=float, nargs="+", help="additional doses to evaluate")
    pr.add_argument("--no-design", action="store_true", help="omit the design doses")
    pr.set_defaults(func=cmd_profile)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and args.reps is None:
        args.reps = 20_000 if args.mode == "mean-squares" else 10_000
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
