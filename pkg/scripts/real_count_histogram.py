"""Histogram of real solution counts over random scenes, as CSV on stdout."""

import argparse
import csv
import sys
from collections import Counter

from respose.bench import run_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    counts = Counter(r.real_count for r in run_benchmark(args.trials, seed=args.seed).trials)
    writer = csv.writer(sys.stdout)
    writer.writerow(["real_count", "trials"])
    for k in range(0, 65, 2):
        writer.writerow([k, counts.get(k, 0)])


if __name__ == "__main__":
    main()
