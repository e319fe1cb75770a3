"""Command-line entry point: ``bbvi-bounds <command> [options]``."""

import argparse
import sys
import time

from . import bounds, experiment, verify
from .config import ExperimentConfig, load_config


def _config(args, **defaults):
    cfg = load_config(args.config) if args.config else ExperimentConfig(**defaults)
    return cfg.with_overrides(seed=args.seed)


def _log(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr, flush=True)


def _output(args):
    return args.out if args.out else sys.stdout


def cmd_run(args):
    cfg = _config(args)
    t0 = time.time()
    target, name = experiment.build_target(cfg)
    _log(args, f"running SGD on {name}: family={cfg.family} form={cfg.form} T={cfg.T}")
    trajectory = experiment.sgd_run(cfg, target)
    records = experiment.trace_bounds(cfg, trajectory, target)
    experiment.write_trace_csv(records, _output(args))
    worst = max((r.gvar_emp - r.bound_rhs) / r.gvar_se for r in records)
    _log(args, f"{len(records)} records in {time.time() - t0:.1f}s; "
               f"worst (gvar - rhs) / se = {worst:.3g}")
    return 0


def cmd_constants(args):
    if args.L_H is not None or args.mu_KL is not None:
        if args.L_H is None or args.mu_KL is None:
            raise ValueError("--L-H and --mu-KL must be given together")
        A = bounds.entropy_form_A(args.L_H, args.mu_KL, args.d, args.M, args.family)
        out = _output(args)
        text = f"L_H,mu_KL,d,M,family,A\n{args.L_H!r},{args.mu_KL!r},{args.d},{args.M},{args.family},{A!r}\n"
        experiment._emit(text, out)
        return 0
    cfg = _config(args, target="linreg")
    experiment.cmd_constants(cfg, _output(args))
    return 0


def cmd_compare(args):
    cfg = _config(args, target="linreg", N=200, d=10)
    _log(args, f"comparing parameterizations over T={cfg.T} iterations")
    experiment.cmd_compare_parameterizations(cfg, _output(args))
    return 0


def cmd_verify(args):
    names = set(args.check) if args.check else None
    if args.out:
        with open(args.out, "w") as fh:
            ok = verify.run_checks(names, fh)
    else:
        ok = verify.run_checks(names, sys.stdout)
    _log(args, "all checks passed" if ok else "some checks FAILED")
    return 0 if ok else 1


def cmd_gen_data(args):
    seed = 0 if args.seed is None else args.seed
    X, y = experiment.synthetic_regression(args.N, args.d, seed, args.noise)
    experiment.write_dataset_csv(X, y, _output(args))
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, help="root seed, overrides the config")
    common.add_argument("--quiet", action="store_true", help="no progress on stderr")

    parser = argparse.ArgumentParser(prog="bbvi-bounds", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="SGD trace with bound terms").set_defaults(fn=cmd_run)

    p = sub.add_parser("constants", parents=[common], help="dataset constants table row")
    p.add_argument("--L-H", dest="L_H", type=float, help="smoothness constant (direct mode)")
    p.add_argument("--mu-KL", dest="mu_KL", type=float, help="growth constant (direct mode)")
    p.add_argument("--d", type=int, default=9)
    p.add_argument("--M", type=int, default=10)
    p.add_argument("--family", default="cholesky")
    p.set_defaults(fn=cmd_constants)

    sub.add_parser("compare-params", parents=[common],
                   help="second moment per parameterization").set_defaults(fn=cmd_compare)

    p = sub.add_parser("verify", parents=[common], help="run the property checks")
    p.add_argument("--check", action="append", help="run only this check (repeatable)")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("gen-data", parents=[common], help="synthetic regression CSV")
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--noise", type=float, default=1.0)
    p.set_defaults(fn=cmd_gen_data)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, experiment.DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
