"""Command-line front end: run the built-in examples, verify gains,
and execute the randomized property suites.

Exit codes: 0 on success, 1 on divergence or verification failure,
2 on configuration errors (including unknown subcommands).
"""

import argparse
import sys

import numpy as np

from .controller import verify_gain
from .harness import (
    EXAMPLE_NAMES,
    ConfigError,
    DivergenceError,
    apply_config_file,
    default_config,
    emit_csv,
    load_gain_check,
    run_closed_loop,
    seed_from_env,
)
from .properties import ALL_SUITES

__all__ = ["cli_main", "main"]


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="esclab",
        description="Extremum-seeking control with a worst-case-optimal adaptive step-size",
    )
    sub = parser.add_subparsers(dest="command")

    for name in EXAMPLE_NAMES:
        p = sub.add_parser(name, help=f"run the {name} closed-loop example")
        p.add_argument("--config", help="INI file overriding the built-in defaults")
        p.add_argument("--out", help="write the trace to this CSV path")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (flag wins over env)")
        p.add_argument("--duration", type=float, default=None, help="override run duration [s]")

    vg = sub.add_parser("verify-gain", help="check the gain stability condition")
    vg.add_argument("--config", help="INI file with a [gain] section")
    vg.add_argument("--k", type=float, default=None, help="scalar gain")
    vg.add_argument("--h-upper", type=float, default=None, help="scalar curvature upper bound")
    vg.add_argument("--gamma", type=float, default=0.0)
    vg.add_argument("--tol", type=float, default=1e-9)
    vg.add_argument("--dim", type=int, default=1)

    cp = sub.add_parser("check-properties", help="run the randomized verification suites")
    cp.add_argument(
        "--suite",
        action="append",
        choices=sorted(ALL_SUITES),
        help="suite(s) to run; default all",
    )
    cp.add_argument("--trials", type=int, default=None, help="trial count override")
    cp.add_argument("--samples", type=int, default=None, help="Monte-Carlo samples per trial")
    cp.add_argument("--seed", type=int, default=None)
    return parser


def _run_example(name, args):
    seed = args.seed if args.seed is not None else seed_from_env(0)
    config = default_config(name, seed=seed)
    if args.config:
        config = apply_config_file(config, args.config)
        config.seed = seed if args.seed is not None else config.seed
    if args.duration is not None:
        config.duration = args.duration
    try:
        trace = run_closed_loop(config)
    except DivergenceError as exc:
        print(f"DIVERGED: {exc}", file=sys.stderr)
        if args.out and exc.trace:
            emit_csv(exc.trace, args.out)
            print(f"partial trace written to {args.out}", file=sys.stderr)
        return 1
    if args.out:
        emit_csv(trace, args.out, dims=(config.plant.n_r, config.plant.n_y))
        print(f"trace written to {args.out} ({len(trace)} rows)")
    if trace:
        final = trace[-1]
        nonzero = sum(1 for rec in trace if rec.alpha > 0.0)
        print(
            f"{name}: t_final={final.t:g} s, y_final={np.array2string(final.output, precision=4)}, "
            f"J_final={final.cost:.6g}, r_final={np.array2string(final.reference, precision=4)}, "
            f"nonzero-step samples {nonzero}/{len(trace)}"
        )
    else:
        print(f"{name}: empty trace (zero duration)")
    return 0


def _run_verify_gain(args):
    if args.config:
        K, H_upper, gamma, tol = load_gain_check(args.config)
        if args.k is not None or args.h_upper is not None:
            raise ConfigError("give either --config or --k/--h-upper, not both")
    else:
        if args.k is None or args.h_upper is None:
            raise ConfigError("verify-gain needs --config or both --k and --h-upper")
        K = args.k * np.eye(args.dim)
        H_upper = args.h_upper * np.eye(args.dim)
        gamma, tol = args.gamma, args.tol
    ok = verify_gain(K, H_upper, gamma, tol)
    print(f"gain condition {'HOLDS' if ok else 'VIOLATED'} "
          f"(gamma={gamma:g}, tol={tol:g})")
    return 0 if ok else 1


def _run_check_properties(args):
    suites = args.suite or sorted(ALL_SUITES)
    seed = args.seed if args.seed is not None else seed_from_env(20260810)
    failures = 0
    for name in suites:
        kwargs = {"seed": seed}
        if args.trials is not None:
            key = "instances" if name == "omega" else "trials"
            kwargs[key] = args.trials
        if args.samples is not None and name in ("step-size", "omega"):
            kwargs["samples"] = args.samples
        result = ALL_SUITES[name](**kwargs)
        print(result)
        if not result.passed:
            failures += 1
    return 0 if failures == 0 else 1


def cli_main(argv=None):
    """Entry point returning the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help; pass through
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.command in EXAMPLE_NAMES:
            return _run_example(args.command, args)
        if args.command == "verify-gain":
            return _run_verify_gain(args)
        if args.command == "check-properties":
            return _run_check_properties(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    parser.print_usage(sys.stderr)
    return 2


def main():
    sys.exit(cli_main())
