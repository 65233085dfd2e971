"""Accuracy as the new camera moves off the line through the reference centres.

For each deviation the median rotation and position errors of the candidate
closest to the truth are written as CSV on stdout.
"""

import argparse
import csv
import sys

import numpy as np

from respose.geometry import rotation_angle_deg
from respose.solver import solve_pose
from respose.synth import SyntheticSpec, generate_scene, trial_seed


def closest_errors(scene, truth):
    best = (np.inf, np.inf)
    for c in solve_pose(scene).candidates:
        rot = rotation_angle_deg(c.pose.matrix, truth.matrix)
        if rot < best[0]:
            best = (rot, float(np.linalg.norm(c.pose.center - truth.center)))
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--triple-match", action="store_true")
    args = ap.parse_args()
    writer = csv.writer(sys.stdout)
    writer.writerow(["deviation", "median_rotation_error_deg", "median_position_error"])
    for dev in [0.0, *np.logspace(-8, 0, 9)]:
        errs = []
        for i in range(args.trials):
            spec = SyntheticSpec(
                geometry="collinear", deviation=float(dev), triple_match=args.triple_match, seed=trial_seed(args.seed, i)
            )
            errs.append(closest_errors(*generate_scene(spec)))
        rot, pos = np.median(np.array(errs), axis=0)
        writer.writerow([f"{dev:.1e}", f"{rot:.3e}", f"{pos:.3e}"])


if __name__ == "__main__":
    main()
