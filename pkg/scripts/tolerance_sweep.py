#!/usr/bin/env python3
"""Waterfilling over a grid of tolerances on 1-way marginal cohorts.

Strategies are selected once per cohort and reused for every tau.
"""
import argparse

import numpy as np

from madp.harness import ExperimentConfig, run_experiment, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/tolerance.json")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config)
    if args.trials:
        cfg.trials = args.trials
    if args.seed is not None:
        cfg.seed = args.seed
    recs = run_experiment(cfg)
    write_csv(recs, cfg.output)
    print(f"{'tau':>8} {'SI viol':>8} {'max ratio':>10} {'median total':>14}")
    for tau in cfg.taus:
        rs = [r for r in recs if r.tau == tau and r.status == "ok"]
        mr = np.array([r.max_ratio_error for r in rs])
        print(f"{tau:8g} {int(np.sum(mr > 1 + 1e-9)):8d} {mr.max():10.4g} "
              f"{np.median([r.total_error for r in rs]):14.6g}")


if __name__ == "__main__":
    main()
