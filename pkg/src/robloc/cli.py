"""Command-line interface: estimate / simulate / breakdown subcommands."""

import argparse
import os
import sys

import numpy as np

from .breakdown import (ContaminationScheme, Placement, empirical_fsbp,
                        scheme_grid)
from .dataio import load_csv
from .errors import RoblocError
from .pipeline import PipelineOptions, estimate_command, make_pipeline
from .regression import SearchConfig
from .simulate import (SimScenario, default_estimators, run_contamination_sweep,
                       run_study)


def _read_config(path):
    """Flat key = value file; '#' starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise SystemExit(f"{path}:{lineno}: expected key = value")
            key, val = (part.strip() for part in text.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def _default_threads():
    try:
        return max(1, int(os.environ.get("ROBLOC_THREADS", "1")))
    except ValueError:
        return 1


def _common(parser):
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=_default_threads())
    parser.add_argument("--config", default=None,
                        help="flat key = value file of defaults")
    parser.add_argument("--subsets", type=int, default=500)
    parser.add_argument("--keep", type=int, default=10)
    parser.add_argument("--refine-steps", type=int, default=50)
    parser.add_argument("--tol", type=float, default=1e-8)
    parser.add_argument("--k0", type=float, default=1.57,
                        help="scale-stage tuning constant")
    parser.add_argument("--k1", type=float, default=3.44,
                        help="efficient-stage tuning constant (regression)")
    parser.add_argument("--delta", type=float, default=0.5)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="robloc",
        description="Robust location estimation with missing responses")
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="estimate a location parameter "
                           "from a CSV file")
    p_est.add_argument("data", help="CSV path (header row required)")
    p_est.add_argument("--functional", default="mm90",
                       choices=["mean", "median", "mm90", "mm95"])
    p_est.add_argument("--regression", default="mm", choices=["mm", "ls"])
    p_est.add_argument("--response", default="y")
    p_est.add_argument("--indicator", default=None)
    p_est.add_argument("--covariates", default=None,
                       help="comma-separated column names (default: all "
                            "non-response columns)")
    p_est.add_argument("--se", dest="se", action="store_true", default=True)
    p_est.add_argument("--no-se", dest="se", action="store_false")
    p_est.add_argument("--format", default="json",
                       choices=["json", "table"])
    p_est.add_argument("--dump-convolution", default=None,
                       help="write every pairwise sum to this CSV")
    _common(p_est)

    p_sim = sub.add_parser("simulate", help="Monte Carlo MSE/efficiency "
                           "study")
    p_sim.add_argument("--replications", type=int, default=1000)
    p_sim.add_argument("--n", type=int, default=100)
    p_sim.add_argument("--contaminate", default=None, metavar="XSTAR:Y0:Y1:STEP",
                       help="sweep contamination responses, e.g. 1:8:50:0.2")
    p_sim.add_argument("--fraction", type=float, default=0.10,
                       help="contaminated fraction of observed rows")
    p_sim.add_argument("--out", default=None, help="CSV output path")
    _common(p_sim)

    p_bd = sub.add_parser("breakdown", help="empirical breakdown grid")
    p_bd.add_argument("--data", default=None,
                      help="CSV input; omitted: a generated base sample")
    p_bd.add_argument("--n", type=int, default=100)
    p_bd.add_argument("--functional", default="median",
                      choices=["mean", "median", "mm90", "mm95"])
    p_bd.add_argument("--regression", default="mm", choices=["mm", "ls"])
    p_bd.add_argument("--fractions", default="0.05,0.10,0.15,0.20,0.25",
                      help="comma-separated contamination fractions")
    p_bd.add_argument("--trials", type=int, default=10,
                      help="seeded contamination trials per grid point")
    p_bd.add_argument("--placement", default="both",
                      choices=[p.value for p in Placement])
    p_bd.add_argument("--out", default=None, help="CSV output path")
    _common(p_bd)
    return parser


def _apply_config(parser, argv):
    ns, _ = parser.parse_known_args(argv)
    if getattr(ns, "config", None):
        overrides = _read_config(ns.config)
        coerced = {}
        for key, raw in overrides.items():
            default = parser.get_default(key)
            if default is None and key not in vars(ns):
                continue
            kind = type(default) if default is not None else str
            coerced[key] = kind(raw) if kind in (int, float) else raw
        parser.set_defaults(**coerced)
    return parser.parse_args(argv)


def _search(args):
    return SearchConfig(n_subsets=args.subsets, n_keep=args.keep,
                        s_refine_steps=args.refine_steps, tol=args.tol,
                        seed=args.seed)


def _cmd_estimate(args):
    covs = args.covariates.split(",") if args.covariates else None
    dataset = load_csv(args.data, response=args.response,
                       covariates=covs, indicator=args.indicator)
    options = PipelineOptions(functional=args.functional,
                              regression=args.regression,
                              reg_k0=args.k0, reg_k1=args.k1,
                              reg_delta=args.delta, want_se=args.se,
                              seed=args.seed, search=_search(args))
    report = estimate_command(dataset.sample, options,
                              dump_convolution=args.dump_convolution)
    if args.format == "json":
        print(report.to_json())
    else:
        print(report.table(), end="")
    return 0


def _cmd_simulate(args):
    scenario = SimScenario(n=args.n, replications=args.replications,
                           seed=args.seed, search=_search(args))
    estimators = default_estimators()
    if args.contaminate:
        parts = args.contaminate.split(":")
        if len(parts) != 4:
            raise SystemExit("--contaminate expects XSTAR:Y0:Y1:STEP")
        x_star, y0, y1, step = (float(v) for v in parts)
        from .simulate import Contamination, contamination_grid
        scenario = SimScenario(n=args.n, replications=args.replications,
                               seed=args.seed, search=_search(args),
                               contamination=Contamination(
                                   fraction=args.fraction, x_star=x_star))
        sweep = run_contamination_sweep(
            scenario, x_star, contamination_grid(y0, y1, step),
            estimators, workers=args.threads)
        if args.out:
            sweep.to_csv(args.out)
            print(f"wrote {args.out}")
        else:
            for i, ys in enumerate(sweep.y_grid):
                row = " ".join(f"{sweep.mse_curves[n][i]:.5f}"
                               for n in sweep.estimator_names)
                print(f"y*={ys:6.2f}  {row}")
        return 0
    report = run_study(scenario, estimators, workers=args.threads)
    print(report.table(), end="")
    if args.out:
        report.to_csv(args.out)
        print(f"wrote {args.out}")
    return 0


def _cmd_breakdown(args):
    if args.data:
        sample = load_csv(args.data).sample
    else:
        from .simulate import generate_replicate
        sample = generate_replicate(SimScenario(n=args.n, seed=args.seed), 0)
    pipeline = make_pipeline(functional=args.functional,
                             regression=args.regression, reg_k0=args.k0,
                             reg_k1=args.k1, reg_delta=args.delta,
                             search=_search(args))
    fractions = [float(v) for v in args.fractions.split(",")]
    schemes = scheme_grid(fractions, sample.n, sample.m,
                          placement=Placement(args.placement))
    report = empirical_fsbp(pipeline, sample, schemes,
                            seeds=list(range(args.trials)))
    print(f"clean estimate {report.clean_value:.6g}  "
          f"escape bound {report.bound:.6g}")
    for row in report.rows:
        mark = "ESCAPED" if row.escaped else "stable"
        print(f"kappa={row.kappa:.4f} (t={row.t}, s={row.s})  {mark}  "
              f"worst |estimate| {row.worst_abs:.6g}")
    if report.smallest_escaping_kappa is None:
        print(f"no escape up to kappa={report.grid_max_kappa:.4f}")
    else:
        print(f"smallest escaping fraction "
              f"{report.smallest_escaping_kappa:.4f}")
    if args.out:
        report.to_csv(args.out)
        print(f"wrote {args.out}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = _apply_config(parser, argv if argv is not None else sys.argv[1:])
    np.seterr(over="ignore", under="ignore")
    try:
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "breakdown":
            return _cmd_breakdown(args)
    except RoblocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
