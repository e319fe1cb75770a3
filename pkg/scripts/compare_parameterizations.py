"""Second moment of the gradient estimator per parameterization along one trajectory.

    python3 scripts/compare_parameterizations.py [--out compare.csv]
"""

import argparse
import pathlib

from bbvi_bounds import experiment
from bbvi_bounds.config import load_config

CONFIG = pathlib.Path(__file__).resolve().parent.parent / "configs" / "regression_compare.cfg"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=str(CONFIG))
    parser.add_argument("--out", default="compare.csv")
    args = parser.parse_args()
    rows = experiment.cmd_compare_parameterizations(load_config(args.config), args.out)
    ordered = sum(r["gvar_square_root"] >= r["gvar_cholesky_linear"] >= r["gvar_cholesky_softplus"]
                  for r in rows)
    last = rows[-1]
    print(f"ordering square-root >= linear >= softplus at {ordered}/{len(rows)} iterates")
    for col in experiment.COMPARE_COLUMNS:
        print(f"  final {col:18s} {last['gvar_' + col]:.4g} +- {last['se_' + col]:.2g}")


if __name__ == "__main__":
    main()
