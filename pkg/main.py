import argparse
import logging
import os
import sys

from nashseek.config import CURRENT_VERSION, BIAS_VARIANCE_REPLICATIONS, OUTPUT_DIR
from nashseek.console_interface import ConsoleInterface
from nashseek.estimators import ESTIMATOR_KINDS, SPSA
from nashseek.experiment_config import ExperimentConfig, ConfigError, ALGORITHMS, PROJECTIONS
from nashseek.harness import run_experiment, run_sweep, run_bias_variance_grid, solve_reference, plot_runs

logger = logging.getLogger("NashSeek_Main")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def setup_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(asctime)s - [NASHSEEK] - %(message)s',
        datefmt='%H:%M:%S',
        force=True
    )


def parse_grid(text, cast=float):
    """
    '0.02..0.32' doubles from the lower to the upper end; 'a,b,c' is a plain list.
    """
    text = text.strip()
    if ".." in text:
        lo, hi = (cast(v) for v in text.split("..", 1))
        if not 0 < lo <= hi:
            raise ValueError(f"bad range {text!r}")
        values = []
        v = lo
        while v <= hi * (1 + 1e-9):
            values.append(cast(v))
            v = v * 2
        return values
    return [cast(v) for v in text.split(",") if v.strip()]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", action="store_true", help="DEBUG logging")
    common.add_argument("--quiet", action="store_true", help="Only warnings and results")

    experiment = argparse.ArgumentParser(add_help=False)
    experiment.add_argument("--config", help="key=value experiment file")
    experiment.add_argument("--out", help="Output directory")
    experiment.add_argument("--seeds", type=int, help="Number of seeds (master_seed + k)")
    experiment.add_argument("--seed-list", help="Explicit comma-separated seeds")
    experiment.add_argument("--algorithm", choices=ALGORITHMS)
    experiment.add_argument("--projection", choices=PROJECTIONS)
    experiment.add_argument("--iters", type=int, help="Iteration budget T")
    experiment.add_argument("--workers", type=int, help="Parallel seeds (env NASHSEEK_WORKERS wins)")
    experiment.add_argument("--reference", help="Load a reference_ne.txt instead of solving")
    experiment.add_argument("--run-id", help="Run directory name")
    experiment.add_argument("--gamma", type=float)

    parser = argparse.ArgumentParser(prog="nashseek",
                                     description="Learning Nash equilibria from noisy cost evaluations")
    parser.add_argument("--version", action="version", version=f"%(prog)s {CURRENT_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common, experiment], help="One configuration, all seeds")
    run.add_argument("--p", type=float, help="Batch growth exponent")

    sweep = sub.add_parser("sweep", parents=[common, experiment], help="SDL over several p")
    sweep.add_argument("--p", help="Comma-separated p values")
    sweep.add_argument("--with-baseline", action="store_true", help="Add the single-shot baseline")

    bv = sub.add_parser("bias-variance", parents=[common], help="Estimator bias/variance grid")
    bv.add_argument("--h", default="0.02..0.32", help="Radii: 'lo..hi' (doubling) or list")
    bv.add_argument("--ell", default="1..64", help="Pair counts: 'lo..hi' (doubling) or list")
    bv.add_argument("--reps", type=int, default=BIAS_VARIANCE_REPLICATIONS, help="Replications per cell")
    bv.add_argument("--seed", type=int, default=0)
    bv.add_argument("--noise", type=float, default=1.0, help="Half-width of the additive noise")
    bv.add_argument("--estimators", default=SPSA, help=f"Comma-separated, from {ESTIMATOR_KINDS}")
    bv.add_argument("--out", default=os.path.join(OUTPUT_DIR, "bias_variance"))

    ne = sub.add_parser("solve-ne", parents=[common, experiment], help="Certified reference equilibrium")
    ne.add_argument("--p", type=float, help=argparse.SUPPRESS)

    plot = sub.add_parser("plot", parents=[common], help="Render persisted mean curves to SVG")
    plot.add_argument("run_dirs", nargs="+", help="Run directories holding mean_curve.csv")
    plot.add_argument("--out", help="SVG path (default: <first run dir>/replot.svg)")
    plot.add_argument("--linear", action="store_true", help="Linear axes instead of log-log")

    return parser


def load_config(args):
    """Defaults, then the config file, then command-line flags."""
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {
        "out": args.out,
        "seeds": args.seeds,
        "seed_list": args.seed_list,
        "algorithm": args.algorithm,
        "projection": args.projection,
        "iters": args.iters,
        "workers": args.workers,
        "reference": args.reference,
        "run_id": args.run_id,
        "gamma": args.gamma,
    }
    if args.command in ("run", "solve-ne"):
        overrides["p"] = args.p
    else:
        overrides["p_list"] = args.p
    return config.update(overrides)


def print_banner(command):
    print("=" * 60)
    print(f"   NashSeek v{CURRENT_VERSION} - Nash equilibrium learning")
    print(f"   Command: {command}")
    print("=" * 60)


def dispatch(args, interface):
    if args.command == "plot":
        out = args.out or os.path.join(args.run_dirs[0], "replot.svg")
        plot_runs(args.run_dirs, out, log_axes=not args.linear)
        return EXIT_OK

    if args.command == "bias-variance":
        estimators = tuple(e.strip() for e in args.estimators.split(",") if e.strip())
        unknown = [e for e in estimators if e not in ESTIMATOR_KINDS]
        if unknown:
            raise ConfigError(f"Unknown estimators {unknown}; choose from {ESTIMATOR_KINDS}")
        try:
            h_values = parse_grid(args.h, float)
            ell_values = parse_grid(args.ell, int)
        except ValueError as e:
            raise ConfigError(f"Bad grid: {e}")
        _, slopes = run_bias_variance_grid(h_values, ell_values, replications=args.reps, seed=args.seed,
                                           out_dir=args.out, noise_halfwidth=args.noise, estimators=estimators)
        lines = []
        for kind, s in slopes.items():
            lines.append(f"{kind}: variance slope vs ell " + ", ".join(f"h={h:g}: {v:.3f}" for h, v in s["vs_ell"].items()))
            lines.append(f"{kind}: variance slope vs h   " + ", ".join(f"ell={ell}: {v:.3f}" for ell, v in s["vs_h"].items()))
        interface.send_update('results', "\n".join(lines))
        return EXIT_OK

    config = load_config(args)

    if args.command == "solve-ne":
        reference, path = solve_reference(config)
        interface.send_update('results', f"{reference}\nwritten to {path}")
        return EXIT_OK

    if args.command == "run":
        run_experiment(config, interface)
        return EXIT_OK

    summaries = run_sweep(config, config.p_list, with_baseline=args.with_baseline, interface=interface)
    table = "\n".join(f"  {s.run_id}: slope={s.slope if s.slope is None else round(s.slope, 4)}, "
                      f"final={s.final_mean_sq_error:.3e}" for s in summaries)
    interface.send_update('results', table)
    return EXIT_OK


def cli_main(argv=None, interface=None):
    """
    Entry point for every subcommand.

    Returns:
        int: 0 on success, 2 on usage/config errors, 1 on runtime errors.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    setup_logging(args.verbose, args.quiet)
    interface = interface or ConsoleInterface(quiet=args.quiet)
    if not args.quiet:
        print_banner(args.command)

    try:
        return dispatch(args, interface)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("\n\nStopped by user (Ctrl+C)")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(cli_main())
