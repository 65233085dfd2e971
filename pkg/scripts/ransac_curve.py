"""Rotation error of the best RANSAC hypothesis per iteration, one column per seed."""

import argparse
import csv
import sys

from respose.robust import RansacConfig, ransac_pose
from respose.synth import SyntheticSpec, generate_scene_detailed


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--iters", type=int, default=200)
    ap.add_argument("--n-points", type=int, default=100)
    ap.add_argument("--outlier-fraction", type=float, default=0.3)
    ap.add_argument("--noise-px", type=float, default=0.5)
    args = ap.parse_args()
    columns = []
    for seed in range(args.runs):
        spec = SyntheticSpec(
            seed=seed, n_points=args.n_points, noise_px=args.noise_px, outlier_fraction=args.outlier_fraction
        )
        data = generate_scene_detailed(spec)
        res = ransac_pose(data.scene, RansacConfig(max_iterations=args.iters, seed=seed), data.truth)
        columns.append([h.best_rotation_error_deg for h in res.history])
    writer = csv.writer(sys.stdout)
    writer.writerow(["iteration", *(f"seed_{s}" for s in range(args.runs))])
    for it, row in enumerate(zip(*columns)):
        writer.writerow([it, *(f"{v:.4g}" for v in row)])


if __name__ == "__main__":
    main()
