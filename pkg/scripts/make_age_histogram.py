#!/usr/bin/env python3
"""Write a synthetic 86-cell age histogram (ages 0..85) as value,count CSV."""
import argparse
from pathlib import Path

import numpy as np

from madp.nonlinear import synthetic_age_histogram, write_histogram_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/ages.csv")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--total", type=int, default=2000, help="number of people")
    args = ap.parse_args()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    hist = synthetic_age_histogram(np.random.default_rng(args.seed), args.total)
    write_histogram_csv(hist, out)
    print(f"wrote {hist.n} cells, {int(hist.counts.sum())} people to {out}")


if __name__ == "__main__":
    main()
