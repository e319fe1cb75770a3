"""Constants table for regression datasets given as CSV files (last column is the response).

    python3 scripts/constants_table.py data/*.csv [--sigma 1 --lam 1 --no-standardize]

Without files, a synthetic dataset is used.
"""

import argparse
import sys

from bbvi_bounds import experiment
from bbvi_bounds.config import ExperimentConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("paths", nargs="*")
    parser.add_argument("--sigma", type=float, default=1.0)
    parser.add_argument("--lam", type=float, default=1.0)
    parser.add_argument("--M", type=int, default=10)
    parser.add_argument("--no-standardize", action="store_true")
    args = parser.parse_args()
    base = ExperimentConfig(target="linreg", sigma=args.sigma, lam=args.lam, M=args.M,
                            standardize=not args.no_standardize)
    rows = []
    for path in args.paths or [None]:
        cfg = base.with_overrides(dataset_path=path)
        target, name = experiment.build_target(cfg)
        rows.append(experiment.constants_row(name, target, cfg.M, cfg.family).values())
    sys.stdout.write(experiment.format_csv(experiment.CONSTANTS_HEADER, rows))


if __name__ == "__main__":
    main()
