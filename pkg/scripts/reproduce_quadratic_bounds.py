"""Run every quadratic-target config and report whether each bound dominates the variance.

    python3 scripts/reproduce_quadratic_bounds.py [--out-dir results]
"""

import argparse
import pathlib
import time

from bbvi_bounds import experiment
from bbvi_bounds.config import load_config

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--seed", type=int)
    args = parser.parse_args()
    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in sorted(CONFIGS.glob("quadratic_*.cfg")):
        cfg = load_config(str(path)).with_overrides(seed=args.seed)
        t0 = time.time()
        target, _ = experiment.build_target(cfg)
        records = experiment.trace_bounds(cfg, experiment.sgd_run(cfg, target), target)
        experiment.write_trace_csv(records, str(out_dir / f"{path.stem}.csv"))
        held = sum(r.gvar_emp <= r.bound_rhs + 3 * r.gvar_se for r in records)
        tightest = min(r.bound_rhs / r.gvar_emp for r in records)
        print(f"{path.stem:28s} bound holds at {held}/{len(records)} iterates, "
              f"tightest rhs/gvar = {tightest:.3g}  ({time.time() - t0:.1f}s)")


if __name__ == "__main__":
    main()
