"""Command-line entry point: ``bootmatch analyze | simulate | figdata``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 too many failed
replicates.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import io
from .engine import THREADS_ENV, BootstrapConfig, resolve_workers, run
from .errors import BootMatchError, TooManyFailures
from .propensity import DesignSpec
from .simgen import SimulationConfig, generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FAILURES = 0, 1, 2, 3

log = logging.getLogger("bootmatch")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _caliper(text):
    if text in ("auto", "none"):
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("caliper must be 'auto', 'none' or a positive number") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("caliper must be positive")
    return value


def build_parser():
    parser = _Parser(prog="bootmatch", description="Bootstrap Matching for A/B tests with broken randomization.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    a = sub.add_parser("analyze", help="run Bootstrap Matching on a dataset CSV")
    a.add_argument("--input", required=True, type=Path)
    a.add_argument("--pre-periods", required=True, type=int, help="number of pre-treatment periods t")
    a.add_argument("--replicates", type=int, default=300)
    a.add_argument("--ratio", type=float, default=0.025, help="subsample fraction q")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", required=True, type=Path)
    a.add_argument("--threads", type=int, default=None, help=f"worker processes (default ${THREADS_ENV} or CPU count)")
    a.add_argument("--estimator", choices=("did", "post_only"), default="did")
    a.add_argument("--caliper", type=_caliper, default="auto",
                   help="'auto' (scale x logit sd), 'none', or an absolute logit caliper")
    a.add_argument("--caliper-scale", type=float, default=0.2)
    a.add_argument("--with-replacement", action="store_true")
    a.add_argument("--min-success", type=float, default=0.9)
    a.add_argument("--storey-lambda", type=float, default=0.5)
    a.add_argument("--covariates", choices=("both", "features", "pre"), default="both")
    a.add_argument("--no-standardize", action="store_true")
    a.add_argument("--ridge", type=float, default=1e-6)
    a.add_argument("--timings", action="store_true",
                   help="record wall-clock phase timings (makes the report run-dependent)")
    a.add_argument("--fig-dir", type=Path, default=None, help="also write fig1.csv/fig2.csv here")

    s = sub.add_parser("simulate", help="write a synthetic digit-tail dataset CSV")
    s.add_argument("--subjects", type=int, default=400_000)
    s.add_argument("--tau", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--features", type=int, default=8)
    s.add_argument("--shift", type=float, default=1.0, help="confounder mean shift of treated subjects")
    s.add_argument("--gamma", type=float, default=1.0, help="confounder effect on the response")
    s.add_argument("--feature-noise", type=float, default=0.5)
    s.add_argument("--noise", type=float, default=1.0)
    s.add_argument("--pre-periods", type=int, default=6)
    s.add_argument("--periods", type=int, default=12)

    f = sub.add_parser("figdata", help="write figure-data CSV tables")
    f.add_argument("--input", required=True, type=Path)
    f.add_argument("--pre-periods", required=True, type=int)
    f.add_argument("--report", type=Path, default=None, help="report JSON for per-replicate pre-period gaps")
    f.add_argument("--out-dir", required=True, type=Path)
    return parser


def _analyze(args):
    timings = {}
    t0 = time.perf_counter()
    dataset = io.load_dataset(args.input, args.pre_periods)
    timings["load_ms"] = (time.perf_counter() - t0) * 1e3
    caliper_scale, caliper_logit = args.caliper_scale, None
    if args.caliper == "none":
        caliper_scale = None
    elif args.caliper != "auto":
        caliper_logit = args.caliper
    design = DesignSpec(
        use_features=args.covariates in ("both", "features"),
        use_pre_period_responses=args.covariates in ("both", "pre"),
        standardize=not args.no_standardize,
    )
    config = BootstrapConfig(
        replicates=args.replicates,
        ratio=args.ratio,
        with_replacement=args.with_replacement,
        master_seed=args.seed,
        workers=resolve_workers(args.threads or 0),
        min_success_fraction=args.min_success,
        estimator=args.estimator,
        design_spec=design,
        caliper_scale=caliper_scale,
        caliper_logit=caliper_logit,
        storey_lambda=args.storey_lambda,
        ridge=args.ridge,
    )
    t0 = time.perf_counter()
    aggregate = run(dataset, config)
    timings["bootstrap_ms"] = (time.perf_counter() - t0) * 1e3
    extra = []
    if aggregate.multiplicity.final_p_method == "mean_lfdr":
        extra.append(
            "final_p is the mean local FDR of z = sign(effect) * Phi^-1(1 - p/2) "
            "under a theoretical N(0,1) null with a Gaussian KDE mixture density"
        )
    if args.timings:
        timings["workers"] = config.workers
        report = io.RunReport(aggregate, timings=timings, extra_warnings=tuple(extra))
    else:
        report = io.RunReport(aggregate, extra_warnings=tuple(extra))
    args.out.write_text(io.serialize_report(report), encoding="utf-8")
    if args.fig_dir is not None:
        args.fig_dir.mkdir(parents=True, exist_ok=True)
        io.emit_fig1_data(dataset, args.fig_dir / "fig1.csv")
        io.emit_fig2_data(aggregate, args.fig_dir / "fig2.csv")
    print(json.dumps({
        "effect": aggregate.effect,
        "final_p": aggregate.final_p,
        "failed_count": aggregate.failed_count,
        "replicates": config.replicates,
    }))
    return EXIT_OK


def _simulate(args):
    config = SimulationConfig(
        n_subjects=args.subjects,
        k=args.features,
        tau=args.tau,
        confounder_shift=args.shift,
        confounder_to_outcome=args.gamma,
        feature_noise_sd=args.feature_noise,
        response_noise_sd=args.noise,
        t=args.pre_periods,
        T=args.periods,
        seed=args.seed,
    )
    io.write_dataset(generate(config), args.out)
    return EXIT_OK


def _figdata(args):
    dataset = io.load_dataset(args.input, args.pre_periods)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    io.emit_fig1_data(dataset, args.out_dir / "fig1.csv")
    if args.report is not None:
        report = io.parse_report(args.report.read_text(encoding="utf-8"))
        io.emit_fig2_data(report.aggregate, args.out_dir / "fig2.csv")
    return EXIT_OK


COMMANDS = {"analyze": _analyze, "simulate": _simulate, "figdata": _figdata}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except TooManyFailures as exc:
        print(f"bootmatch: {exc}", file=sys.stderr)
        return EXIT_FAILURES
    except (BootMatchError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"bootmatch: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
