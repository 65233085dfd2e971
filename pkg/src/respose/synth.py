"""Seeded synthetic scenes with known ground truth.

Random numbers come from NumPy's PCG64 bit generator, so a spec and seed give
the same scene on every platform.  Cameras look roughly at the origin from a
few scene units away; 3D points are drawn in a cube around the origin
and kept only when every observing camera sees them in front and inside a
field of view of +-``half_fov`` in normalized coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import (
    CalibratedCamera,
    MatchPair,
    Pose,
    Quaternion,
    Scene,
    TripleMatch,
    triangulate_midpoint,
)

GEOMETRIES = ("general", "collinear", "four_two")


@dataclass(frozen=True)
class SyntheticSpec:
    n_cameras: int = 2
    n_points: int = 6
    noise_px: float = 0.0
    outlier_fraction: float = 0.0
    geometry: str = "general"
    deviation: float = 0.0  # collinear only: offset of the new camera from the baseline
    seed: int = 0
    focal_px: float = 800.0
    split: Optional[tuple] = None
    triple_match: bool = False
    target_rotation: Optional[Quaternion] = None
    half_fov: float = 0.6
    baseline: float = 6.0  # collinear only
    point_extent: float = 2.0  # points are drawn in [-extent, extent]^3

    def __post_init__(self):
        if self.n_cameras < 2:
            raise ValueError("n_cameras must be at least 2")
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError("outlier_fraction must lie in [0, 1)")
        if self.noise_px < 0:
            raise ValueError("noise_px must be non-negative")
        if self.split is not None and (sum(self.split) != self.n_points or len(self.split) > self.n_cameras):
            raise ValueError("split must sum to n_points and use at most n_cameras cameras")


@dataclass
class SyntheticScene:
    scene: Scene
    truth: Pose
    points: np.ndarray
    outliers: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def trial_seed(root: int, index: int) -> int:
    """Independent per-trial seed derived from a root seed and a trial index."""
    return int(np.random.SeedSequence([root, index]).generate_state(2, np.uint64)[0] >> np.uint64(1))


def look_at(center, target, rng: np.random.Generator) -> np.ndarray:
    """Camera-to-world rotation whose optical axis points at ``target``, random roll."""
    f = np.asarray(target, dtype=float) - center
    f /= np.linalg.norm(f)
    a = rng.normal(size=3)
    a -= (a @ f) * f
    x = a / np.linalg.norm(a)
    y = np.cross(f, x)
    return np.column_stack([x, y, f])


def _random_unit(rng) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def _default_split(spec: SyntheticSpec) -> tuple:
    if spec.split is not None:
        return tuple(spec.split)
    if spec.geometry == "four_two":
        if spec.n_points != 6:
            raise ValueError("four_two geometry is defined for 6 matches")
        return (4, 2)
    k = spec.n_cameras
    return tuple(spec.n_points // k + (1 if i < spec.n_points % k else 0) for i in range(k))


def _camera_layout(spec: SyntheticSpec, rng):
    """Reference camera poses and the true pose of the new camera."""
    aim = lambda: rng.normal(scale=0.3, size=3)  # noqa: E731
    if spec.geometry == "collinear":
        n = _random_unit(rng)
        u = _random_unit(rng)
        u -= (u @ n) * n
        u /= np.linalg.norm(u)
        w = np.cross(n, u)
        c0 = 5.0 * n
        offsets = np.linspace(-spec.baseline / 2, spec.baseline / 2, spec.n_cameras)
        refs = [Pose.from_matrix(look_at(c0 + o * u, aim(), rng), c0 + o * u) for o in offsets]
        center = c0 + rng.uniform(-0.3, 0.3) * spec.baseline * u + spec.deviation * w
    else:
        refs = []
        for _ in range(spec.n_cameras):
            c = _random_unit(rng) * rng.uniform(4.0, 6.0)
            refs.append(Pose.from_matrix(look_at(c, aim(), rng), c))
        center = _random_unit(rng) * rng.uniform(4.0, 6.0)
    if spec.target_rotation is not None:
        R = spec.target_rotation.normalized().to_matrix()
        center = -R[:, 2] * rng.uniform(4.0, 6.0)
        truth = Pose.from_matrix(R, center)
    else:
        truth = Pose.from_matrix(look_at(center, aim(), rng), center)
    return refs, truth


def _visible(pose: Pose, X, half_fov: float) -> bool:
    cam = (X - pose.translation) @ pose.matrix
    if cam[2] <= 0.1:
        return False
    return bool(np.all(np.abs(cam[:2] / cam[2]) < half_fov))


def _sample_point(rng, poses, half_fov, extent=1.0, tries=10000) -> np.ndarray:
    for _ in range(tries):
        X = rng.uniform(-extent, extent, size=3)
        if all(_visible(p, X, half_fov) for p in poses):
            return X
    raise RuntimeError("could not sample a point visible in all cameras")


def generate_scene_detailed(spec: SyntheticSpec) -> SyntheticScene:
    rng = make_rng(spec.seed)
    split = _default_split(spec)
    for _ in range(100):
        refs, truth = _camera_layout(spec, rng)
        try:
            owners = [i for i, n in enumerate(split) for _ in range(n)]
            points = np.array([_sample_point(rng, [truth, refs[i]], spec.half_fov, spec.point_extent) for i in owners])
            triple_pt = _sample_point(rng, [truth, refs[0], refs[1]], spec.half_fov, spec.point_extent) if spec.triple_match else None
            break
        except RuntimeError:
            continue
    else:
        raise RuntimeError("could not build a scene satisfying cheirality")

    sigma = spec.noise_px / spec.focal_px

    def observe(pose, X):
        p = pose.project(X)
        if sigma > 0:
            p[:2] += rng.normal(scale=sigma, size=2)
        return p

    cams = [CalibratedCamera(f"cam{i}", pose) for i, pose in enumerate(refs)]
    matches = [MatchPair(observe(truth, X), cams[i].id, observe(refs[i], X)) for X, i in zip(points, owners)]

    n_out = int(round(spec.outlier_fraction * len(matches)))
    outliers = np.zeros(len(matches), bool)
    if n_out:
        idx = rng.choice(len(matches), size=n_out, replace=False)
        outliers[idx] = True
        for i in idx:
            fake = np.r_[rng.uniform(-spec.half_fov, spec.half_fov, size=2), 1.0]
            matches[i] = MatchPair(fake, matches[i].ref_camera, matches[i].ref_point)

    triple = None
    if triple_pt is not None:
        obs = [observe(refs[0], triple_pt), observe(refs[1], triple_pt)]
        P = triple_pt if sigma == 0 else triangulate_midpoint(refs[:2], obs)
        triple = TripleMatch(P, observe(truth, triple_pt))
    return SyntheticScene(Scene(cams, matches, triple), truth, points, outliers)


def generate_scene(spec: SyntheticSpec):
    """``(scene, ground_truth_pose)`` for a synthetic spec."""
    s = generate_scene_detailed(spec)
    return s.scene, s.truth
