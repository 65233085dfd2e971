"""Six-point absolute pose of a new camera from matches to calibrated cameras.

The rotation comes from the hidden-variable Dixon resultant: every real
eigenvalue ``q2`` of the pencil, together with ``q3, q4`` read from its null
vector, gives a quaternion ``(1, q2, q3, q4)``.  The translation then solves
the constraints, which are linear in ``t`` once the rotation is fixed.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .dixon import DixonPencil, PencilStructureError, dixon_pencil
from .geometry import (
    CalibratedCamera,
    ConstraintCoefficients,
    Pose,
    Quaternion,
    Scene,
    TripleMatch,
    build_constraint,
    essential_from_poses,
    rotation_angle_deg,
    sampson_errors,
    skew,
)
from .polyeig import (
    EigenSolution,
    evaluate_matrix_polynomial,
    is_real,
    linearize,
    null_vector,
    real_roots_univariate,
    solve_generalized,
)


class UnsupportedConfigurationError(ValueError):
    """The split of matches over reference cameras cannot be solved here."""


class TranslationError(RuntimeError):
    pass


class ScaleResolutionError(RuntimeError):
    pass


class ConfigurationKind(enum.Enum):
    GENERIC = "generic"
    FOUR_TWO = "four_two"
    FIVE_ONE = "five_one"
    INVALID = "invalid"


@dataclass(frozen=True)
class Configuration:
    counts: dict
    kind: ConfigurationKind

    @property
    def four_camera(self) -> Optional[str]:
        if self.kind is not ConfigurationKind.FOUR_TWO:
            return None
        return max(self.counts, key=self.counts.get)


def detect_configuration(scene: Scene) -> Configuration:
    counts = dict(Counter(m.ref_camera for m in scene.matches))
    top = max(counts.values()) if counts else 0
    if len(counts) < 2:
        kind = ConfigurationKind.INVALID
    elif top == 5:
        kind = ConfigurationKind.FIVE_ONE
    elif top == 4:
        kind = ConfigurationKind.FOUR_TWO
    else:
        kind = ConfigurationKind.GENERIC
    return Configuration(counts, kind)


@dataclass(frozen=True)
class SolverConfig:
    eps_rank: float = 1e-6
    real_tol: float = 1e-6
    eigen_residual_tol: float = 1e-6
    # candidates whose normalized constraint residual exceeds this are dropped
    candidate_residual_tol: float = 1e-6
    structure_tol: float = 1e-6
    dedupe_tol: float = 1e-7
    # relative distance below which a candidate centre counts as a reference centre
    centre_tol: float = 1e-6
    normalize_frame: bool = True
    retry: bool = True
    retry_sampson_threshold: float = 1e-10
    retry_seed: int = 0
    # generic pencils have this many finite eigenvalues; fewer suggests a
    # root escaped to infinity
    expected_finite: int = 64


@dataclass(frozen=True)
class LineParametrization:
    t_base: np.ndarray
    t_dir: np.ndarray
    alpha: Optional[float] = None

    def __post_init__(self):
        d = np.asarray(self.t_dir, dtype=float)
        object.__setattr__(self, "t_dir", d / np.linalg.norm(d))
        object.__setattr__(self, "t_base", np.asarray(self.t_base, dtype=float).copy())

    def point(self, alpha: Optional[float] = None) -> np.ndarray:
        a = self.alpha if alpha is None else alpha
        return self.t_base + (a or 0.0) * self.t_dir


@dataclass(frozen=True)
class PoseCandidate:
    pose: Pose
    sampson_total: float
    eq3_residual_norm: float
    translation_rank: int
    q2: float
    line: Optional[LineParametrization] = None
    cheirality_violations: int = 0

    @property
    def quaternion(self) -> Quaternion:
        return self.pose.rotation


@dataclass
class Diagnostics:
    complex_count: int = 0
    real_count: int = 0
    config: Optional[Configuration] = None
    retried: bool = False
    discarded: int = 0
    # largest |q2| among real roots whose candidate failed the residual test
    max_discarded_q2: float = 0.0
    notes: list = field(default_factory=list)


@dataclass
class SolutionSet:
    candidates: list
    diagnostics: Diagnostics

    @property
    def best(self) -> Optional[PoseCandidate]:
        return self.candidates[0] if self.candidates else None

    def __len__(self) -> int:
        return len(self.candidates)


# frame handling ------------------------------------------------------------------


@dataclass(frozen=True)
class _Frame:
    """World-to-working similarity ``X -> scale * G (X - origin)``."""

    G: np.ndarray
    origin: np.ndarray
    scale: float

    def point(self, X):
        return self.scale * (self.G @ (np.asarray(X) - self.origin))

    def pose_in(self, pose: Pose) -> Pose:
        return Pose.from_matrix(self.G @ pose.matrix, self.point(pose.translation))

    def pose_out(self, pose: Pose) -> Pose:
        return Pose.from_matrix(self.G.T @ pose.matrix, self.G.T @ pose.translation / self.scale + self.origin)

    def line_out(self, line: LineParametrization) -> LineParametrization:
        return LineParametrization(self.G.T @ line.t_base / self.scale + self.origin, self.G.T @ line.t_dir, line.alpha)


def _frame_for(scene: Scene, normalize: bool, G=None) -> _Frame:
    G = np.eye(3) if G is None else np.asarray(G, dtype=float)
    if not normalize:
        return _Frame(G, np.zeros(3), 1.0)
    centers = np.array([c.pose.translation for c in scene.cameras if any(m.ref_camera == c.id for m in scene.matches)])
    origin = centers.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((centers - origin) ** 2, axis=1)))
    return _Frame(G, origin, np.sqrt(2.0) / rms if rms > 0 else 1.0)


def _working_constraints(scene: Scene, frame: _Frame) -> list:
    cams = {c.id: CalibratedCamera(c.id, frame.pose_in(c.pose)) for c in scene.cameras}
    return [build_constraint(m, cams[m.ref_camera]) for m in scene.matches]


# translation -----------------------------------------------------------------------


def translation_system(q: Quaternion, constraints: Sequence[ConstraintCoefficients]):
    """Rows ``(R p) x s`` and right-hand sides ``-(R p) . b``, row-balanced."""
    R = q.to_matrix()
    A, rhs = [], []
    for c in constraints:
        rp = R @ c.p
        w = 1.0 / max(np.linalg.norm(c.s), np.linalg.norm(c.b), 1e-300)
        A.append(w * np.cross(rp, c.s))
        rhs.append(-w * rp @ c.b)
    return np.array(A), np.array(rhs)


def _rot_homogeneous(q: np.ndarray) -> np.ndarray:
    """``|q|^2 R(q)``, a quadratic form in the quaternion components."""
    w, x, y, z = q
    return np.array(
        [
            [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
        ]
    )


_E4 = np.eye(4)


def polish_root(q: np.ndarray, t: np.ndarray, constraints: Sequence[ConstraintCoefficients], steps: int = 3):
    """Newton steps on the six constraints plus ``|q|^2 = 1``.

    This sharpens a root of the minimal system that elimination delivered
    with a few digits lost; it does not fit noisy data.  Returns the
    input unchanged if the residual does not improve.
    """
    P = np.array([c.p for c in constraints], float)
    S = np.array([c.s for c in constraints], float)
    B = np.array([c.b for c in constraints], float)
    w = 1.0 / np.maximum(np.maximum(np.linalg.norm(S, axis=1), np.linalg.norm(B, axis=1)), 1e-300)

    def residual(q, t):
        a = P @ _rot_homogeneous(q).T
        f = w * np.einsum("ni,ni->n", a, np.cross(S, t) + B)
        return np.r_[f, q @ q - 1.0], a

    q = np.asarray(q, float) / np.linalg.norm(q)
    t = np.asarray(t, float)
    f, a = residual(q, t)
    best = (np.linalg.norm(f), q, t)
    for _ in range(steps):
        J = np.zeros((7, 7))
        lever = np.cross(S, t) + B
        for i in range(4):
            # the map is quadratic, so the central difference is exact
            dR = 0.5 * (_rot_homogeneous(q + _E4[i]) - _rot_homogeneous(q - _E4[i]))
            J[:6, i] = w * np.einsum("ni,ni->n", P @ dR.T, lever)
        J[:6, 4:] = w[:, None] * np.cross(a, S)
        J[6, :4] = 2.0 * q
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            break
        q, t = q + step[:4], t + step[4:]
        f, a = residual(q, t)
        if not np.all(np.isfinite(f)):
            break
        if np.linalg.norm(f) < best[0]:
            best = (np.linalg.norm(f), q, t)
    return best[1] / np.linalg.norm(best[1]), best[2]


def recover_translation(q: Quaternion, constraints: Sequence[ConstraintCoefficients], eps_rank: float = 1e-6):
    """Least-squares ``t`` for a fixed rotation, or a line when rank is 2."""
    A, rhs = translation_system(q, constraints)
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    if sv[0] == 0 or sv[1] <= eps_rank * sv[0]:
        raise TranslationError("translation system has rank below 2")
    coef = U.T @ rhs
    if sv[2] > eps_rank * sv[0]:
        return Vt.T @ (coef / sv)
    base = Vt[:2].T @ (coef[:2] / sv[:2])
    return LineParametrization(base, Vt[2])


def resolve_scale(line: LineParametrization, q: Quaternion, triple: TripleMatch) -> np.ndarray:
    """Place ``t`` on the line using one point with known 3D position."""
    Rt = q.to_matrix().T
    px = skew(triple.target_point)
    a = px @ Rt @ line.t_dir
    r = px @ Rt @ (triple.point3d - line.t_base)
    if np.linalg.norm(a) <= 1e-12 * max(np.linalg.norm(r), 1.0):
        raise ScaleResolutionError("triple match is parallel to the ambiguous direction")
    alpha = float(a @ r / (a @ a))
    return line.t_base + alpha * line.t_dir


# scoring -------------------------------------------------------------------------------


def _match_arrays(scene: Scene):
    P = np.array([m.target_point for m in scene.matches])
    PP = np.array([m.ref_point for m in scene.matches])
    ids = [m.ref_camera for m in scene.matches]
    return P, PP, ids


def sampson_total(pose: Pose, scene: Scene) -> float:
    return float(np.sum(per_match_sampson(pose, scene)))


def per_match_sampson(pose: Pose, scene: Scene) -> np.ndarray:
    P, PP, ids = _match_arrays(scene)
    out = np.empty(len(ids))
    for cam in scene.cameras:
        sel = np.array([i == cam.id for i in ids])
        if sel.any():
            out[sel] = sampson_errors(essential_from_poses(pose, cam.pose), P[sel], PP[sel])
    return out


def normalized_residual(pose: Pose, constraints: Sequence[ConstraintCoefficients]) -> float:
    """``max_k |p^T R^T (s x t + b)| / (|s| |t| + |b|)`` with unit ``p``."""
    P = np.array([c.p for c in constraints], float)
    S = np.array([c.s for c in constraints], float)
    B = np.array([c.b for c in constraints], float)
    t = pose.translation
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    r = np.abs(np.einsum("ni,ni->n", P @ pose.matrix.T, np.cross(S, t) + B))
    den = np.linalg.norm(S, axis=1) * np.linalg.norm(t) + np.linalg.norm(B, axis=1)
    return float(np.max(np.where(den > 0, r / np.where(den > 0, den, 1.0), r)))


def cheirality_violations(pose: Pose, scene: Scene) -> int:
    """Matches whose two viewing rays meet behind the new or the reference camera.

    The ray parameters of the closest points between the rays are the depths
    up to positive factors, so only their signs are needed.
    """
    P = np.array([np.r_[m.target_point[:2], 1.0] if len(m.target_point) == 2 else m.target_point for m in scene.matches], float)
    PP = np.array([np.r_[m.ref_point[:2], 1.0] if len(m.ref_point) == 2 else m.ref_point for m in scene.matches], float)
    refs = [scene.camera(m.ref_camera).pose for m in scene.matches]
    d1 = P @ pose.matrix.T
    d2 = np.einsum("nij,nj->ni", np.array([r.matrix for r in refs]), PP)
    w = pose.translation - np.array([r.translation for r in refs])
    a = np.einsum("ni,ni->n", d1, d1)
    b = np.einsum("ni,ni->n", d1, d2)
    c = np.einsum("ni,ni->n", d2, d2)
    dw = np.einsum("ni,ni->n", d1, w)
    ew = np.einsum("ni,ni->n", d2, w)
    den = a * c - b * b
    lam1 = (b * ew - c * dw) * np.sign(P[:, 2])
    lam2 = (a * ew - b * dw) * np.sign(PP[:, 2])
    bad = (den <= 1e-15 * a * c) | (lam1 <= 0) | (lam2 <= 0)
    return int(bad.sum())


def _rank_key(c: PoseCandidate):
    return (c.cheirality_violations, c.sampson_total, c.eq3_residual_norm, tuple(c.quaternion.as_array()))


def rank_solutions(candidates: Sequence[PoseCandidate], scene: Optional[Scene] = None) -> list:
    """Stable sort: fewest cheirality violations, then total Sampson error,
    then constraint residual, then quaternion components.

    Every root of the minimal system fits the six matches exactly, so on
    noise-free data the Sampson totals are all at rounding level; cheirality
    is the only physical evidence that separates candidates there.  Passing a
    scene rescores both quantities.
    """
    cands = list(candidates)
    if scene is not None:
        cands = [
            replace(c, sampson_total=sampson_total(c.pose, scene), cheirality_violations=cheirality_violations(c.pose, scene))
            for c in cands
        ]
    return sorted(cands, key=_rank_key)


def dedupe(candidates: Sequence[PoseCandidate], tol: float = 1e-7) -> list:
    """Drop candidates within ``tol`` (radians, relative translation) of a better one."""
    ordered = sorted(candidates, key=_rank_key)
    kept: list = []
    quats = np.zeros((0, 4))
    trans = np.zeros((0, 3))
    for c in ordered:
        q = c.quaternion.as_array()
        if len(kept):
            # rotation angle between unit quaternions is 2 acos |<qa, qb>|
            cosines = np.minimum(np.abs(quats @ q), 1.0)
            near = 2.0 * np.arccos(cosines) < tol
            dt = np.linalg.norm(trans - c.pose.translation, axis=1)
            near &= dt < tol * np.maximum(1.0, np.linalg.norm(trans, axis=1))
            if near.any():
                continue
        kept.append(c)
        quats = np.vstack([quats, q])
        trans = np.vstack([trans, c.pose.translation])
    return kept


# null-vector extraction ------------------------------------------------------------


def _q34_index(pencil: DixonPencil) -> dict:
    return {(m[4], m[5]): i for i, m in enumerate(pencil.col_monomials) if not any(m[:4])}


def _shift_matrix(basis: np.ndarray, index: dict, axis: int) -> np.ndarray:
    """Multiplication-by-``q3`` (axis 0) or ``q4`` (axis 1) on a null space."""
    src, dst = [], []
    for (a, b), i in index.items():
        nxt = (a + 1, b) if axis == 0 else (a, b + 1)
        if nxt in index:
            src.append(i)
            dst.append(index[nxt])
    return np.linalg.lstsq(basis[src], basis[dst], rcond=None)[0]


def _cluster(values: np.ndarray, tol: float) -> list:
    groups: list = []
    for i, v in enumerate(values):
        for g in groups:
            if abs(v - values[g[0]]) < tol * (1.0 + abs(v)):
                g.append(i)
                break
        else:
            groups.append([i])
    return groups


def multiplicity_points(Mz: np.ndarray, pencil: DixonPencil, nullity: int, seed: int = 0) -> list:
    """``(q3, q4)`` pairs from a null space of dimension ``nullity``.

    Each null vector is a combination of monomial vectors of the points
    sharing this ``q2``.  Restricted to the null space, multiplication by
    ``q3`` and ``q4`` are commuting operators whose joint eigenvalues are
    those points; repeated points are handled by averaging over invariant
    subspaces of a random combination of the two.
    """
    _, _, Vh = np.linalg.svd(Mz)
    basis = Vh[-nullity:].conj().T
    index = _q34_index(pencil)
    T3 = _shift_matrix(basis, index, 0)
    T4 = _shift_matrix(basis, index, 1)
    c = np.random.default_rng(seed).uniform(0.5, 1.5, 2)
    T = c[0] * T3 + c[1] * T4
    values = np.linalg.eigvals(T)
    points = []
    for g in _cluster(values, 1e-5):
        centre = values[g].mean()
        m = len(g)
        _, Z, _ = scipy.linalg.schur(
            T.astype(complex), output="complex", sort=lambda z, centre=centre: abs(z - centre) < 1e-5 * (1 + abs(centre))
        )
        Zm = Z[:, :m]
        q3 = np.trace(Zm.conj().T @ T3 @ Zm) / m
        q4 = np.trace(Zm.conj().T @ T4 @ Zm) / m
        points.append((complex(q3), complex(q4)))
    return points


def _null_space_gap(sv: np.ndarray, skip_one: bool) -> int:
    """Dimension of the numerical null space from the largest singular gap."""
    tail = sv[::-1]
    best, best_gap = 1, 0.0
    for r in range(2 if skip_one else 1, min(7, len(sv))):
        gap = tail[r] / max(tail[r - 1], 1e-300)
        if gap > best_gap:
            best, best_gap = r, gap
    return best


def _scaled_at(pencil: DixonPencil, q2: float):
    """``M(q2)`` with column ``q3^a q4^b`` multiplied by ``rho^(a+b)`` and unit rows.

    Near a half-turn every quaternion component is large, so the monomial
    vector spans many orders of magnitude and its small entries drown in
    rounding.  With ``rho = max(1, |q2|)`` the null vector becomes the
    monomial vector of ``(q3 / rho, q4 / rho)``, which is well scaled.
    """
    rho = max(1.0, abs(q2))
    deg = np.array([sum(m) for m in pencil.col_monomials])
    Ms = pencil.at(q2) * (rho ** deg)[None, :]
    norms = np.linalg.norm(Ms, axis=1, keepdims=True)
    return Ms / np.where(norms > 0, norms, 1.0), rho


def extract_points(sol: EigenSolution, pencil: DixonPencil, cfg: SolverConfig) -> list:
    """Real ``(q3, q4)`` candidates attached to one eigenvalue."""
    q2 = sol.q2.real
    Ms, rho = _scaled_at(pencil, q2)
    v, sv = null_vector(Ms)
    index = _q34_index(pencil)
    pts = []
    if abs(v[0]) > 0:
        z3, z4 = v[index[(1, 0)]], v[index[(0, 1)]]
        model = pencil.monomial_vector(np.array([0, 0, 0, 0, z3, z4]))
        err = np.linalg.norm(model - v) / np.linalg.norm(v)
        if err < cfg.structure_tol and sv[-2] > 1e-8:
            pts = [(z3, z4)]
    if not pts:
        r = _null_space_gap(sv, skip_one=True)
        pts = multiplicity_points(Ms, pencil, r, seed=cfg.retry_seed)
    return [
        (rho * z3.real, rho * z4.real) for z3, z4 in pts if is_real(z3, cfg.real_tol) and is_real(z4, cfg.real_tol)
    ]


# candidates -----------------------------------------------------------------------


def _make_candidate(q_vec, q2, scene, frame, constraints, world_constraints, cfg) -> Optional[PoseCandidate]:
    q = Quaternion.from_array(q_vec).normalized().canonical()
    try:
        sol = recover_translation(q, constraints, cfg.eps_rank)
        if not isinstance(sol, LineParametrization):
            qp, tp = polish_root(q.as_array(), sol, constraints)
            q = Quaternion.from_array(qp).canonical()
            # an inexact root can hide a rank-2 system that the polished one shows
            sol = recover_translation(q, constraints, cfg.eps_rank)
            if not isinstance(sol, LineParametrization):
                sol = tp
    except TranslationError:
        return None
    line = None
    if isinstance(sol, LineParametrization):
        line = frame.line_out(sol)
        rank = 2
    else:
        rank = 3
    Rw = frame.G.T @ q.to_matrix()
    qw = Quaternion.from_matrix(Rw)
    if line is not None:
        t = line.t_base
        if scene.triple_match is not None:
            try:
                t = resolve_scale(line, qw, scene.triple_match)
                line = replace(line, alpha=float((t - line.t_base) @ line.t_dir))
            except ScaleResolutionError:
                pass
    else:
        pose = frame.pose_out(Pose(q, sol))
        qw, t = pose.rotation, pose.translation
    pose = Pose(qw, t)
    return PoseCandidate(
        pose=pose,
        sampson_total=sampson_total(pose, scene),
        eq3_residual_norm=normalized_residual(pose, world_constraints),
        translation_rank=rank,
        q2=float(q2),
        line=line,
        cheirality_violations=cheirality_violations(pose, scene),
    )


def _world_constraints(scene: Scene) -> list:
    return [build_constraint(m, scene.camera(m.ref_camera)) for m in scene.matches]


def _check_scene(scene: Scene) -> Configuration:
    if len(scene.matches) != 6:
        raise ValueError(f"a minimal solve needs exactly 6 matches, got {len(scene.matches)}")
    config = detect_configuration(scene)
    if config.kind is ConfigurationKind.INVALID:
        raise UnsupportedConfigurationError(
            f"all six matches come from camera {next(iter(config.counts))!r}; "
            "the pose is ill-posed (translation scale is unobservable from one reference view)"
        )
    if config.kind is ConfigurationKind.FIVE_ONE:
        cam = max(config.counts, key=config.counts.get)
        idx = [i for i, m in enumerate(scene.matches) if m.ref_camera == cam]
        raise UnsupportedConfigurationError(
            f"five matches {idx} come from camera {cam!r}; this split needs a five-point "
            "essential-matrix solver, which is not supported"
        )
    return config


def _generic_attempt(scene: Scene, cfg: SolverConfig, G=None) -> SolutionSet:
    config = detect_configuration(scene)
    frame = _frame_for(scene, cfg.normalize_frame, G)
    constraints = _working_constraints(scene, frame)
    world = _world_constraints(scene)
    pencil = dixon_pencil(constraints)
    sols = solve_generalized(linearize(pencil), residual_tol=cfg.eigen_residual_tol)
    diag = Diagnostics(complex_count=len(sols), config=config)
    reals = [s for s in sols if is_real(s.q2, cfg.real_tol)]
    diag.real_count = len(reals)
    cands = []
    for s in reals:
        for q3, q4 in extract_points(s, pencil, cfg):
            c = _make_candidate((1.0, s.q2.real, q3, q4), s.q2.real, scene, frame, constraints, world, cfg)
            if c is not None:
                cands.append(c)
    return _finish(cands, diag, cfg, scene)


def _at_reference_centre(pose: Pose, scene: Scene, tol: float) -> bool:
    """Whether the camera sits on the centre of a reference camera it has matches to.

    There every constraint from that camera holds for any rotation, so such
    roots (a whole curve of them in the 4+2 split) are degenerate.
    """
    used = {m.ref_camera for m in scene.matches}
    centres = np.array([c.pose.translation for c in scene.cameras if c.id in used])
    spread = np.sqrt(np.mean(np.sum((centres - centres.mean(axis=0)) ** 2, axis=1)))
    dist = np.linalg.norm(centres - pose.translation, axis=1)
    return bool(np.any(dist <= tol * max(spread, 1e-300)))


def _finish(cands: list, diag: Diagnostics, cfg: SolverConfig, scene: Scene) -> SolutionSet:
    degenerate = [c for c in cands if _at_reference_centre(c.pose, scene, cfg.centre_tol)]
    if degenerate:
        diag.notes.append(f"dropped {len(degenerate)} root(s) with the camera on a reference centre")
        cands = [c for c in cands if not any(c is d for d in degenerate)]
    good = [c for c in cands if c.eq3_residual_norm < cfg.candidate_residual_tol]
    diag.discarded += len(cands) - len(good)
    bad = [abs(c.q2) for c in cands if c.eq3_residual_norm >= cfg.candidate_residual_tol]
    diag.max_discarded_q2 = max([diag.max_discarded_q2, *bad])
    return SolutionSet(dedupe(good, cfg.dedupe_tol), diag)


def _retry_rotation(seed: int) -> np.ndarray:
    q = np.random.default_rng(seed).normal(size=4)
    return Quaternion.from_array(q).normalized().to_matrix()


def _anomalous(result: SolutionSet, cfg: SolverConfig, expected_finite: Optional[int]) -> bool:
    best = result.best
    if best is None or best.cheirality_violations > 0 or best.sampson_total > cfg.retry_sampson_threshold:
        return True
    if expected_finite is None:
        return False
    return result.diagnostics.discarded > 0 or result.diagnostics.complex_count < expected_finite


def _with_retry(attempt, scene: Scene, cfg: SolverConfig, expected_finite: Optional[int]) -> SolutionSet:
    """Run ``attempt``; on an anomaly run it again in a rotated frame.

    ``expected_finite`` enables the eigenvalue-count and discarded-root
    triggers, which only carry signal on the generic path: the reduced 4+2
    pencil has a varying number of spurious finite eigenvalues.
    """
    try:
        first = attempt(scene, cfg, None)
    except PencilStructureError as exc:
        # special alignments with the axes can cancel a column in this frame only
        if not cfg.retry:
            raise
        result = attempt(scene, cfg, _retry_rotation(cfg.retry_seed))
        result.diagnostics.retried = True
        result.diagnostics.notes.append(f"retried in a rotated frame: {exc}")
        return result
    if not cfg.retry or not _anomalous(first, cfg, expected_finite):
        return first
    # A rotation by pi has q1 = 0, which the q1 = 1 normalisation cannot
    # reach: its root escapes to infinity, or comes back too ill-conditioned
    # to pass the residual test.  In a rotated global frame it is an ordinary
    # root.  Both attempts only keep verified roots, so their union is safe.
    second = attempt(scene, cfg, _retry_rotation(cfg.retry_seed))
    diag = first.diagnostics
    diag.retried = True
    diag.notes.append(
        f"retried in a rotated frame: {len(first)} + {len(second)} candidates, "
        f"{second.diagnostics.complex_count} finite eigenvalues on retry"
    )
    return SolutionSet(dedupe(first.candidates + second.candidates, cfg.dedupe_tol), diag)


def solve_pose(scene: Scene, config: SolverConfig = SolverConfig()) -> SolutionSet:
    """All real pose candidates for the new camera, best first."""
    kind = _check_scene(scene).kind
    if kind is ConfigurationKind.FOUR_TWO:
        return solve_pose_42(scene, config)
    return _with_retry(_generic_attempt, scene, config, config.expected_finite)


# four matches from one camera --------------------------------------------------------

REDUCED_SIZE = 23


def _lu_relation(Mz: np.ndarray, right: Sequence[int]) -> np.ndarray:
    """Coefficients on the ``right`` columns of the first row of U whose
    pivot falls among them, after moving those columns to the end."""
    n = Mz.shape[1]
    left = [i for i in range(n) if i not in set(right)]
    _, _, U = scipy.linalg.lu(Mz[:, left + list(right)])
    return U[len(left), len(left):]


def four_two_points(Mz: np.ndarray, pencil: DixonPencil) -> list:
    """``(q3, q4)`` candidates at one ``q2`` of the rank-deficient pencil.

    With ``1, q4, ..., q4^5`` moved to the rightmost columns, LU elimination
    leaves a row that is a quintic in ``q4``; for each of its real roots a
    second elimination with ``1, q4, ..., q4^4, q3`` on the right gives an
    equation linear in ``q3``.
    """
    index = _q34_index(pencil)
    rel = _lu_relation(Mz, [index[(0, b)] for b in range(6)])
    scale = np.abs(Mz).max()
    if np.abs(rel).max() <= 1e-14 * scale:
        return []
    rel3 = _lu_relation(Mz, [index[(0, b)] for b in range(5)] + [index[(1, 0)]])
    if abs(rel3[5]) <= 1e-14 * scale:
        return []
    return [(float(-np.polyval(rel3[:5][::-1], q4) / rel3[5]), float(q4)) for q4 in real_roots_univariate(rel)]


def _four_two_attempt(scene: Scene, cfg: SolverConfig, G=None) -> SolutionSet:
    config = detect_configuration(scene)
    frame = _frame_for(scene, cfg.normalize_frame, G)
    constraints = _working_constraints(scene, frame)
    world = _world_constraints(scene)
    pencil = dixon_pencil(constraints)
    reduced = pencil.restricted(REDUCED_SIZE)
    sols = solve_generalized(linearize(reduced), residual_tol=cfg.eigen_residual_tol)
    diag = Diagnostics(complex_count=len(sols), config=config)
    reals = [s for s in sols if is_real(s.q2, cfg.real_tol)]
    diag.real_count = len(reals)
    cands = []
    for s in reals:
        q2 = s.q2.real
        per_root = []
        Ms, rho = _scaled_at(pencil, q2)
        for z3, z4 in four_two_points(Ms, pencil):
            q3, q4 = rho * z3, rho * z4
            c = _make_candidate((1.0, q2, q3, q4), q2, scene, frame, constraints, world, cfg)
            if c is not None:
                per_root.append(c)
        if per_root:
            cands.append(min(per_root, key=_rank_key))
        else:
            diag.discarded += 1
    return _finish(cands, diag, cfg, scene)


def solve_pose_42(scene: Scene, config: SolverConfig = SolverConfig()) -> SolutionSet:
    """Solver for four matches from one reference camera and two from others."""
    if _check_scene(scene).kind is not ConfigurationKind.FOUR_TWO:
        raise UnsupportedConfigurationError("solve_pose_42 needs exactly four matches from one camera")
    return _with_retry(_four_two_attempt, scene, config, None)


__all__ = [
    "Configuration",
    "ConfigurationKind",
    "Diagnostics",
    "LineParametrization",
    "PencilStructureError",
    "PoseCandidate",
    "SolutionSet",
    "SolverConfig",
    "TranslationError",
    "ScaleResolutionError",
    "UnsupportedConfigurationError",
    "cheirality_violations",
    "dedupe",
    "detect_configuration",
    "four_two_points",
    "multiplicity_points",
    "normalized_residual",
    "per_match_sampson",
    "polish_root",
    "rank_solutions",
    "recover_translation",
    "resolve_scale",
    "sampson_total",
    "solve_pose",
    "solve_pose_42",
]
