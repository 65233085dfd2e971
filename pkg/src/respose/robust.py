"""RANSAC around the six-point solver.

Each iteration draws its sample from its own PCG64 stream, spawned from the
configured seed with :class:`numpy.random.SeedSequence`.  Iterations are
therefore independent, and running them on several threads gives the same
history as running them in order.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Pose, Scene, rotation_angle_deg
from .solver import SolverConfig, UnsupportedConfigurationError, per_match_sampson, solve_pose
from .synth import SyntheticSpec, generate_scene, generate_scene_detailed, make_rng

DEFAULT_THRESHOLD_PX = 2.0
DEFAULT_FOCAL_PX = 800.0


def pixel_to_sampson(pixels: float, focal_px: float = DEFAULT_FOCAL_PX) -> float:
    """Inlier threshold in normalized Sampson units for a pixel distance.

    Sampson error is a squared distance in normalized image coordinates, so
    a pixel radius ``r`` at focal length ``f`` maps to ``(r / f)^2``.
    """
    return (pixels / focal_px) ** 2


class SampleScheme(enum.Enum):
    THREE_PLUS_THREE = "three_plus_three"
    UNIFORM_SIX = "uniform_six"


class RansacError(RuntimeError):
    pass


@dataclass(frozen=True)
class RansacConfig:
    max_iterations: int = 200
    inlier_threshold: float = pixel_to_sampson(DEFAULT_THRESHOLD_PX)
    seed: int = 0
    sample_scheme: SampleScheme = SampleScheme.THREE_PLUS_THREE
    score_all_candidates: bool = True
    workers: Optional[int] = None  # None reads RESPOSE_THREADS, default 1
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.inlier_threshold > 0:
            raise ValueError("inlier_threshold must be positive")
        object.__setattr__(self, "sample_scheme", SampleScheme(self.sample_scheme))


@dataclass(frozen=True)
class HistoryEntry:
    iteration: int
    best_cost: float
    best_inlier_count: int
    best_rotation_error_deg: Optional[float] = None


@dataclass
class RansacResult:
    pose: Pose
    inlier_mask: np.ndarray
    history: list
    iterations_with_candidates: int

    @property
    def inlier_count(self) -> int:
        return int(self.inlier_mask.sum())


def _thread_count(requested: Optional[int]) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("RESPOSE_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _by_camera(scene: Scene) -> dict:
    groups: dict = {}
    for i, m in enumerate(scene.matches):
        groups.setdefault(m.ref_camera, []).append(i)
    return groups


def draw_sample(scene: Scene, scheme: SampleScheme, rng: np.random.Generator, max_tries: int = 100) -> list:
    """Indices of six matches spanning at least two reference cameras.

    The three-plus-three scheme picks two cameras with at least three matches
    each and three matches from each.  The uniform scheme draws six matches
    and redraws until no camera supplies five or more of them.
    """
    groups = _by_camera(scene)
    if scheme is SampleScheme.THREE_PLUS_THREE:
        eligible = sorted(c for c, idx in groups.items() if len(idx) >= 3)
        if len(eligible) < 2:
            raise RansacError("three-plus-three sampling needs two cameras with at least three matches")
        a, b = rng.choice(len(eligible), size=2, replace=False)
        return sorted(
            int(i) for cam in (eligible[a], eligible[b]) for i in rng.choice(groups[cam], size=3, replace=False)
        )
    n = len(scene.matches)
    owner = np.array([m.ref_camera for m in scene.matches])
    for _ in range(max_tries):
        idx = rng.choice(n, size=6, replace=False)
        _, counts = np.unique(owner[idx], return_counts=True)
        if len(counts) >= 2 and counts.max() <= 4:
            return sorted(int(i) for i in idx)
    raise RansacError("could not draw a six-match sample spanning two cameras")


def score_pose(pose: Pose, scene: Scene, threshold: float):
    """Inlier mask and the scalar cost ``outliers + inlier_sampson / (threshold * n)``.

    The fractional part stays below one, so ordering by cost is the same as
    ordering by inlier count first and inlier Sampson total second.
    """
    err = per_match_sampson(pose, scene)
    mask = err < threshold
    n = len(err)
    cost = float((n - mask.sum()) + err[mask].sum() / (threshold * n))
    return mask, cost


def _iteration(scene: Scene, cfg: RansacConfig, seq: np.random.SeedSequence):
    rng = make_rng(seq)
    try:
        idx = draw_sample(scene, cfg.sample_scheme, rng)
        sub = Scene(scene.cameras, [scene.matches[i] for i in idx], scene.triple_match)
        solutions = solve_pose(sub, cfg.solver)
    except (UnsupportedConfigurationError, np.linalg.LinAlgError, RuntimeError, ValueError):
        return None
    # The six sampled matches cannot tell the real roots apart, so every
    # candidate is scored on the full match set.
    pool = solutions.candidates if cfg.score_all_candidates else solutions.candidates[:1]
    best = None
    for cand in pool:
        mask, cost = score_pose(cand.pose, scene, cfg.inlier_threshold)
        if best is None or cost < best[2]:
            best = (cand.pose, mask, cost)
    return best


def ransac_pose(scene: Scene, cfg: RansacConfig = RansacConfig(), truth: Optional[Pose] = None) -> RansacResult:
    """Pose with the most inliers over ``cfg.max_iterations`` minimal samples.

    ``history[k]`` describes the best hypothesis after iteration ``k``; its
    cost never increases.  Passing ``truth`` adds the rotation error of that
    hypothesis to each entry.
    """
    if len(scene.matches) < 6:
        raise RansacError(f"need at least 6 matches, got {len(scene.matches)}")
    if len(_by_camera(scene)) < 2:
        raise RansacError("matches must span at least two reference cameras")
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.max_iterations)
    workers = _thread_count(cfg.workers)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda s: _iteration(scene, cfg, s), seqs))
    else:
        results = [_iteration(scene, cfg, s) for s in seqs]

    best = None
    history = []
    produced = 0
    for k, res in enumerate(results):
        if res is not None:
            produced += 1
            if best is None or res[2] < best[2]:
                best = res
        if best is None:
            history.append(HistoryEntry(k, float("inf"), 0, None))
            continue
        err = rotation_angle_deg(best[0].matrix, truth.matrix) if truth is not None else None
        history.append(HistoryEntry(k, best[2], int(best[1].sum()), err))
    if best is None:
        raise RansacError("no iteration produced a pose candidate")
    return RansacResult(best[0], best[1], history, produced)


__all__ = [
    "HistoryEntry",
    "RansacConfig",
    "RansacError",
    "RansacResult",
    "SampleScheme",
    "SyntheticSpec",
    "draw_sample",
    "generate_scene",
    "generate_scene_detailed",
    "pixel_to_sampson",
    "ransac_pose",
    "score_pose",
]
