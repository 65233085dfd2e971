"""Command-line entry point: ``respose <command> ...``.

Exit codes: 0 success, 1 unreadable input or a failed check, 2 an
unsupported match configuration (argparse also uses 2 for usage errors).
Every JSON document written carries a ``format_version`` field.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bkk
from .bench import run_benchmark
from .geometry import rotation_angle_deg
from .robust import RansacConfig, RansacError, SampleScheme, pixel_to_sampson, ransac_pose
from .sceneio import (
    FORMAT_VERSION,
    SceneFormatError,
    pose_to_dict,
    read_pose,
    read_scene,
    write_json,
    write_pose,
    write_scene,
)
from .solver import SolverConfig, UnsupportedConfigurationError, solve_pose
from .synth import GEOMETRIES, SyntheticSpec, generate_scene

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNSUPPORTED = 2

# Test hook: maps a bound name to a function rewriting its polytopes.
FAULT_INJECTORS = {
    # mixed volumes are multilinear, so doubling one support doubles the bound
    "double-support": lambda polys: [
        bkk.NewtonPolytope.from_points([tuple(2 * v for v in a) for a in polys[0].support]),
        *polys[1:],
    ],
}


def _emit(doc: dict, as_json: bool, text_lines: Sequence[str], out) -> None:
    if as_json:
        out.write(json.dumps({"format_version": FORMAT_VERSION, **doc}, indent=2) + "\n")
    else:
        out.write("\n".join(text_lines) + "\n")


def _fmt_pose(pose) -> str:
    q = pose.rotation.as_array()
    c = pose.translation
    return f"q = [{q[0]:.12g}, {q[1]:.12g}, {q[2]:.12g}, {q[3]:.12g}]  center = [{c[0]:.12g}, {c[1]:.12g}, {c[2]:.12g}]"


# commands ---------------------------------------------------------------------


def cmd_solve(args, out) -> int:
    scene = read_scene(args.scene)
    result = solve_pose(scene, SolverConfig(retry_seed=args.retry_seed))
    d = result.diagnostics
    cands = result.candidates if args.all_solutions else result.candidates[:1]
    doc = {
        "diagnostics": {
            "complex_count": d.complex_count,
            "real_count": d.real_count,
            "configuration": d.config.kind.value if d.config else None,
            "split": d.config.counts if d.config else None,
            "retried": d.retried,
            "discarded": d.discarded,
            "notes": d.notes,
        },
        "candidates": [
            {
                "rank": i,
                "pose": pose_to_dict(c.pose),
                "sampson_total": c.sampson_total,
                "cheirality_violations": c.cheirality_violations,
                "residual": c.eq3_residual_norm,
                "translation_rank": c.translation_rank,
                **(
                    {"line": {"base": c.line.t_base.tolist(), "direction": c.line.t_dir.tolist(), "alpha": c.line.alpha}}
                    if c.line is not None
                    else {}
                ),
            }
            for i, c in enumerate(cands)
        ],
    }
    lines = [
        f"configuration: {doc['diagnostics']['configuration']} {d.config.counts if d.config else ''}",
        f"finite eigenvalues: {d.complex_count}  real: {d.real_count}  candidates: {len(result)}",
    ]
    if not result.candidates:
        lines.append("no real solution")
    for i, c in enumerate(cands):
        lines.append(
            f"#{i}: {_fmt_pose(c.pose)}  sampson = {c.sampson_total:.3e}  behind = {c.cheirality_violations}"
            f"  rank(t) = {c.translation_rank}"
        )
    _emit(doc, args.json, lines, out)
    return EXIT_OK


def cmd_ransac(args, out) -> int:
    scene = read_scene(args.scene)
    truth = read_pose(args.truth) if args.truth else None
    threshold = args.threshold if args.threshold is not None else pixel_to_sampson(args.threshold_px, args.focal_px)
    cfg = RansacConfig(
        max_iterations=args.iters,
        inlier_threshold=threshold,
        seed=args.seed,
        sample_scheme=SampleScheme(args.scheme),
    )
    res = ransac_pose(scene, cfg, truth)
    if args.history:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "best_rotation_error_deg", "best_inlier_count"])
        for h in res.history:
            err = "" if h.best_rotation_error_deg is None else repr(h.best_rotation_error_deg)
            w.writerow([h.iteration, err, h.best_inlier_count])
        Path(args.history).write_text(buf.getvalue())
    err = rotation_angle_deg(res.pose.matrix, truth.matrix) if truth is not None else None
    doc = {
        "pose": pose_to_dict(res.pose),
        "inlier_count": res.inlier_count,
        "inliers": np.flatnonzero(res.inlier_mask).tolist(),
        "iterations": args.iters,
        "rotation_error_deg": err,
    }
    lines = [f"pose: {_fmt_pose(res.pose)}", f"inliers: {res.inlier_count} / {len(scene.matches)}"]
    if err is not None:
        lines.append(f"rotation error: {err:.6g} deg")
    _emit(doc, args.json, lines, out)
    return EXIT_OK


def cmd_synth(args, out) -> int:
    spec = SyntheticSpec(
        n_cameras=args.n_cameras,
        n_points=args.n_points,
        noise_px=args.noise_px,
        outlier_fraction=args.outlier_fraction,
        geometry=args.geometry,
        deviation=args.deviation,
        seed=args.seed,
        split=tuple(args.split) if args.split else None,
        triple_match=args.triple_match,
    )
    scene, truth = generate_scene(spec)
    write_scene(args.out, scene)
    truth_path = args.truth_out or str(Path(args.out).with_suffix("")) + ".truth.json"
    write_pose(truth_path, truth)
    out.write(f"wrote {args.out} and {truth_path}\n")
    return EXIT_OK


def cmd_verify_bounds(args, out) -> int:
    hook = None
    if args.inject_fault:
        target, name = args.inject_fault.split(":", 1) if ":" in args.inject_fault else ("bkk_dq", args.inject_fault)
        fault = FAULT_INJECTORS[name]

        def hook(bound, polys):
            return fault(polys) if bound == target else polys

    try:
        reports = bkk.verify_bounds(hook)
    except bkk.MixedVolumeError as exc:
        out.write(f"mixed volume failed: {exc}\n")
        return EXIT_INPUT
    ok = all(r.ok for r in reports)
    doc = {"bounds": [{"name": r.name, "value": r.value, "expected": r.expected, "ok": r.ok} for r in reports]}
    lines = [f"{r.name:24s} {r.value:6d}  expected {r.expected:6d}  {'ok' if r.ok else 'MISMATCH'}" for r in reports]
    if args.cross_check:
        rng = np.random.default_rng(args.seed)
        agree = 0
        for _ in range(args.cross_check_trials):
            dim = int(rng.integers(2, 4))
            P = bkk.random_lattice_polytope(rng, dim)
            Q = bkk.random_lattice_polytope(rng, dim)
            polys = [P] * (dim - 1) + [Q]
            agree += bkk.mixed_volume(polys) == bkk.mixed_volume_inclusion_exclusion(polys)
        doc["cross_check"] = {"trials": args.cross_check_trials, "agree": agree}
        lines.append(f"cross-check against inclusion-exclusion: {agree}/{args.cross_check_trials} agree")
        ok = ok and agree == args.cross_check_trials
    _emit(doc, args.json, lines, out)
    return EXIT_OK if ok else EXIT_INPUT


def cmd_bench(args, out) -> int:
    report = run_benchmark(args.trials, args.seed)
    summary = report.summary()
    if args.out_json:
        write_json(args.out_json, {"format_version": FORMAT_VERSION, **report.as_dict()})
    if args.out_csv:
        with open(args.out_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["real_count", "trials"])
            for k, v in summary["real_count_histogram"].items():
                w.writerow([k, v])
    rot = summary["rotation_error_deg"]
    lines = [
        f"trials: {summary['trials']}",
        f"rotation error (closest candidate): mean {rot['closest']['mean']:.3e}  median {rot['closest']['median']:.3e} deg",
        f"rotation error (best ranked):       mean {rot['best_ranked']['mean']:.3e}  median {rot['best_ranked']['median']:.3e} deg",
        f"max residual: mean {summary['max_residual']['mean']:.3e}  median {summary['max_residual']['median']:.3e}",
        f"finite eigenvalue counts: {summary['complex_count_histogram']}",
        f"real roots: {summary['real_count']['mean']:.2f} +- {summary['real_count']['std']:.2f}",
        f"time per solve: mean {summary['ms_per_solve']['mean']:.1f} ms  median {summary['ms_per_solve']['median']:.1f} ms",
    ]
    _emit({"summary": summary}, args.json, lines, out)
    return EXIT_OK


# parser -------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="respose", description="Absolute pose of a new camera from six matches to calibrated cameras.")
    sub = p.add_subparsers(dest="command", required=True)

    def fmt(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--json", action="store_true", help="machine-readable output")
        g.add_argument("--text", dest="json", action="store_false", help="human-readable output (default)")

    s = sub.add_parser("solve", help="solve a six-match scene file")
    s.add_argument("scene")
    s.add_argument("--all-solutions", action="store_true")
    s.add_argument("--retry-seed", type=int, default=0)
    fmt(s)
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("ransac", help="robust pose from many matches")
    r.add_argument("scene")
    r.add_argument("--iters", type=_positive_int, default=200)
    r.add_argument("--threshold", type=float, help="inlier threshold in Sampson units")
    r.add_argument("--threshold-px", type=float, default=2.0)
    r.add_argument("--focal-px", type=float, default=800.0)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--scheme", choices=[s.value for s in SampleScheme], default=SampleScheme.THREE_PLUS_THREE.value)
    r.add_argument("--truth", help="ground-truth pose file, adds errors to the history")
    r.add_argument("--history", help="write the per-iteration history CSV here")
    fmt(r)
    r.set_defaults(func=cmd_ransac)

    y = sub.add_parser("synth", help="write a synthetic scene and its ground truth")
    y.add_argument("--n-cameras", type=int, default=2)
    y.add_argument("--n-points", type=int, default=6)
    y.add_argument("--noise-px", type=float, default=0.0)
    y.add_argument("--outlier-fraction", type=float, default=0.0)
    y.add_argument("--geometry", choices=GEOMETRIES, default="general")
    y.add_argument("--deviation", type=float, default=0.0)
    y.add_argument("--split", type=int, nargs="+")
    y.add_argument("--triple-match", action="store_true")
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--out", required=True)
    y.add_argument("--truth-out")
    y.set_defaults(func=cmd_synth)

    v = sub.add_parser("verify-bounds", help="recompute the Bezout and BKK root-count bounds")
    v.add_argument("--cross-check", action="store_true", help="compare mixed-volume routes on random small polytopes")
    v.add_argument("--cross-check-trials", type=_positive_int, default=10)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--inject-fault", help=argparse.SUPPRESS)
    fmt(v)
    v.set_defaults(func=cmd_verify_bounds)

    b = sub.add_parser("bench", help="noise-free accuracy, root-count and timing statistics")
    b.add_argument("--trials", type=_positive_int, default=100)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out-json")
    b.add_argument("--out-csv", help="histogram of real root counts")
    fmt(b)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except UnsupportedConfigurationError as exc:
        sys.stderr.write(f"unsupported configuration: {exc}\n")
        return EXIT_UNSUPPORTED
    except (SceneFormatError, OSError, RansacError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
