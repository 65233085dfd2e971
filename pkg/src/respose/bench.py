"""Noise-free benchmark over seeded random scenes."""

from __future__ import annotations

import os
import statistics
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .geometry import rotation_angle_deg
from .solver import SolverConfig, solve_pose
from .synth import SyntheticSpec, generate_scene, trial_seed


@dataclass(frozen=True)
class TrialRecord:
    index: int
    seed: int
    complex_count: int
    real_count: int
    n_candidates: int
    best_rotation_error_deg: float
    closest_rotation_error_deg: float
    closest_translation_error: float
    best_residual: float
    retried: bool
    seconds: float


@dataclass
class BenchmarkReport:
    trials: list = field(default_factory=list)

    def summary(self) -> dict:
        recs = self.trials
        best = [r.best_rotation_error_deg for r in recs]
        closest = [r.closest_rotation_error_deg for r in recs]
        resid = [r.best_residual for r in recs]
        reals = [r.real_count for r in recs]
        ms = [1e3 * r.seconds for r in recs]
        return {
            "trials": len(recs),
            "rotation_error_deg": {
                "best_ranked": {"mean": float(np.mean(best)), "median": float(np.median(best))},
                "closest": {"mean": float(np.mean(closest)), "median": float(np.median(closest))},
            },
            "max_residual": {"mean": float(np.mean(resid)), "median": float(np.median(resid))},
            "complex_count_histogram": {str(k): v for k, v in sorted(Counter(r.complex_count for r in recs).items())},
            "real_count": {"mean": float(np.mean(reals)), "std": float(np.std(reals)) if len(reals) > 1 else 0.0},
            "real_count_histogram": {str(k): v for k, v in sorted(Counter(reals).items())},
            "ms_per_solve": {"mean": float(np.mean(ms)), "median": float(statistics.median(ms))},
            "retried": int(sum(r.retried for r in recs)),
        }

    def as_dict(self) -> dict:
        return {"summary": self.summary(), "trials": [asdict(r) for r in self.trials]}


def run_trial(index: int, root_seed: int, spec: SyntheticSpec, config: SolverConfig) -> TrialRecord:
    seed = trial_seed(root_seed, index)
    scene, truth = generate_scene(SyntheticSpec(**{**asdict(spec), "seed": seed}))
    start = time.perf_counter()
    result = solve_pose(scene, config)
    elapsed = time.perf_counter() - start
    errs = [rotation_angle_deg(c.pose.matrix, truth.matrix) for c in result.candidates]
    if errs:
        k = int(np.argmin(errs))
        best_err, closest = errs[0], errs[k]
        t_err = float(np.linalg.norm(result.candidates[k].pose.translation - truth.translation))
        resid = result.candidates[0].eq3_residual_norm
    else:
        best_err = closest = t_err = resid = float("inf")
    d = result.diagnostics
    return TrialRecord(index, seed, d.complex_count, d.real_count, len(result), best_err, closest, t_err, resid, d.retried, elapsed)


def run_benchmark(
    trials: int,
    seed: int = 0,
    spec: SyntheticSpec = SyntheticSpec(),
    config: SolverConfig = SolverConfig(),
    workers: Optional[int] = None,
) -> BenchmarkReport:
    """Solve ``trials`` scenes whose seeds derive from ``seed`` and the trial index."""
    if workers is None:
        env = os.environ.get("RESPOSE_THREADS", "")
        workers = int(env) if env.isdigit() and int(env) > 0 else 1
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            recs = list(pool.map(lambda i: run_trial(i, seed, spec, config), range(trials)))
    else:
        recs = [run_trial(i, seed, spec, config) for i in range(trials)]
    return BenchmarkReport(recs)
