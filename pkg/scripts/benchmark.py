"""Noise-free solver benchmark; prints the summary and optionally writes JSON."""

import argparse
import json

from respose.bench import run_benchmark
from respose.synth import SyntheticSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--split", type=int, nargs="+", help="matches per reference camera, e.g. 4 2")
    ap.add_argument("--out-json")
    args = ap.parse_args()
    spec = SyntheticSpec(split=tuple(args.split) if args.split else None)
    report = run_benchmark(args.trials, seed=args.seed, spec=spec)
    print(json.dumps(report.summary(), indent=2))
    if args.out_json:
        with open(args.out_json, "w") as fh:
            json.dump({"format_version": 1, **report.as_dict()}, fh, indent=1)


if __name__ == "__main__":
    main()
