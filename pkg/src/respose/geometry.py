"""Quaternions, poses, epipolar constraints and Sampson errors.

Convention: a camera with pose ``(R, t)`` has its center at ``t`` and sees the
world point ``P`` at the normalized image point ``p ~ R^T (P - t)``.  ``R``
therefore maps camera coordinates into the global frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    exact: float = 1e-10
    noisy: float = 1e-6
    unit_quaternion: float = 1e-9
    sampson_denominator: float = 1e-300


TOL = Tolerances()


def skew(v) -> np.ndarray:
    """Cross-product matrix: ``skew(a) @ b == a x b``."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def hamilton_tuple(a, b):
    """Hamilton product on 4-sequences of any ring elements (floats, polynomials)."""
    r1, x1, y1, z1 = a
    r2, x2, y2, z2 = b
    return (
        r1 * r2 - x1 * x2 - y1 * y2 - z1 * z2,
        r1 * x2 + r2 * x1 + y1 * z2 - z1 * y2,
        r1 * y2 + r2 * y1 + z1 * x2 - x1 * z2,
        r1 * z2 + r2 * z1 + x1 * y2 - y1 * x2,
    )


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float
    y: float
    z: float

    @classmethod
    def identity(cls) -> "Quaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        w, x, y, z = (float(v) for v in a)
        return cls(w, x, y, z)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Quaternion":
        u = np.asarray(axis, dtype=float)
        u = u / np.linalg.norm(u)
        s = np.sin(angle / 2.0)
        return cls(np.cos(angle / 2.0), *(s * u))

    @classmethod
    def from_matrix(cls, R) -> "Quaternion":
        return matrix_to_quaternion(R)

    @classmethod
    def pure(cls, v) -> "Quaternion":
        return cls(0.0, *np.asarray(v, dtype=float))

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def normalized(self) -> "Quaternion":
        return Quaternion.from_array(self.as_array() / self.norm())

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def canonical(self) -> "Quaternion":
        """Unit representative of ``{q, -q}`` with non-negative real part."""
        a = self.as_array() / self.norm()
        if a[0] < 0 or (a[0] == 0 and next(v for v in a[1:] if v != 0) < 0):
            a = -a
        return Quaternion.from_array(a)

    def to_matrix(self) -> np.ndarray:
        return quaternion_to_matrix(self)

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        return hamilton_product(self, other)


def hamilton_product(q1: Quaternion, q2: Quaternion) -> Quaternion:
    return Quaternion(*hamilton_tuple(q1.as_array(), q2.as_array()))


def quaternion_to_matrix(q: Quaternion) -> np.ndarray:
    w, x, y, z = q.as_array() / q.norm()
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quaternion(R) -> Quaternion:
    """Shepperd's method; returns the canonical (w >= 0) representative."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    diag = np.diag(R)
    k = int(np.argmax(np.r_[tr, diag]))
    if k == 0:
        w = 0.5 * np.sqrt(max(1.0 + tr, 0.0))
        q = [w, (R[2, 1] - R[1, 2]) / (4 * w), (R[0, 2] - R[2, 0]) / (4 * w), (R[1, 0] - R[0, 1]) / (4 * w)]
    else:
        i = k - 1
        j, l = (i + 1) % 3, (i + 2) % 3
        s = 0.5 * np.sqrt(max(1.0 + R[i, i] - R[j, j] - R[l, l], 0.0))
        v = np.zeros(3)
        v[i] = s
        v[j] = (R[j, i] + R[i, j]) / (4 * s)
        v[l] = (R[l, i] + R[i, l]) / (4 * s)
        q = [(R[l, j] - R[j, l]) / (4 * s), *v]
    return Quaternion.from_array(q).canonical()


def rotate_point(q: Quaternion, p) -> np.ndarray:
    """Rotate ``p`` by conjugation ``q (0; p) q*``."""
    if abs(q.norm() - 1.0) > TOL.unit_quaternion:
        raise ValueError(f"rotation quaternion must have unit norm, got {q.norm():.12g}")
    out = hamilton_tuple(hamilton_tuple(q.as_array(), (0.0, *np.asarray(p, dtype=float))), q.conjugate().as_array())
    return np.array(out[1:])


def rotation_angle_deg(Ra, Rb) -> float:
    """Angle of the relative rotation ``Ra^T Rb`` in degrees."""
    # the quaternion form keeps precision for tiny angles, unlike arccos(trace)
    qa = matrix_to_quaternion(Ra).as_array()
    qb = matrix_to_quaternion(Rb).as_array()
    c = abs(float(np.dot(qa, qb)))
    s = np.linalg.norm(hamilton_tuple((qa[0], *-qa[1:]), qb)[1:])
    return float(np.degrees(2.0 * np.arctan2(s, c)))


@dataclass(frozen=True)
class Pose:
    rotation: Quaternion
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", self.rotation.canonical())
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3).copy())

    @classmethod
    def from_matrix(cls, R, t) -> "Pose":
        return cls(matrix_to_quaternion(R), t)

    @property
    def matrix(self) -> np.ndarray:
        return self.rotation.to_matrix()

    @property
    def center(self) -> np.ndarray:
        return self.translation

    def project(self, X) -> np.ndarray:
        """Normalized homogeneous image point(s) of world point(s) ``X``."""
        X = np.asarray(X, dtype=float)
        cam = (np.atleast_2d(X) - self.translation) @ self.matrix
        out = cam / cam[:, 2:3]
        return out if X.ndim > 1 else out[0]

    def depth(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return ((X - self.translation) @ self.matrix)[:, 2]

    def transformed(self, G, g, scale: float = 1.0) -> "Pose":
        """Pose after the global similarity ``X -> scale * (G X + g)``."""
        G = np.asarray(G, dtype=float)
        return Pose.from_matrix(G @ self.matrix, scale * (G @ self.translation + np.asarray(g, dtype=float)))


@dataclass(frozen=True)
class CalibratedCamera:
    id: str
    pose: Pose


def _homogeneous(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape == (2,):
        return np.r_[v, 1.0]
    if v.shape != (3,):
        raise ValueError(f"expected an image point (x, y) or (x, y, 1), got shape {v.shape}")
    return v.copy()


@dataclass(frozen=True)
class MatchPair:
    target_point: np.ndarray
    ref_camera: str
    ref_point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "target_point", _homogeneous(self.target_point))
        object.__setattr__(self, "ref_point", _homogeneous(self.ref_point))


@dataclass(frozen=True)
class TripleMatch:
    point3d: np.ndarray
    target_point: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.point3d, dtype=float).reshape(3)
        if not np.all(np.isfinite(P)):
            raise ValueError("triple match 3D point must be finite")
        object.__setattr__(self, "point3d", P.copy())
        object.__setattr__(self, "target_point", _homogeneous(self.target_point))


@dataclass(frozen=True)
class ConstraintCoefficients:
    p: np.ndarray
    s: np.ndarray
    b: np.ndarray

    def scaled(self, factor: float) -> "ConstraintCoefficients":
        return ConstraintCoefficients(self.p, self.s * factor, self.b * factor)


@dataclass
class Scene:
    cameras: list
    matches: list
    triple_match: Optional[TripleMatch] = None

    def __post_init__(self):
        ids = [c.id for c in self.cameras]
        if len(set(ids)) != len(ids):
            raise ValueError("camera ids must be unique")
        known = set(ids)
        for k, m in enumerate(self.matches):
            if m.ref_camera not in known:
                raise ValueError(f"match {k} references unknown camera {m.ref_camera!r}")

    def camera(self, cam_id: str) -> CalibratedCamera:
        for c in self.cameras:
            if c.id == cam_id:
                return c
        raise KeyError(cam_id)

    def subset(self, indices: Sequence[int]) -> "Scene":
        return Scene(self.cameras, [self.matches[i] for i in indices], self.triple_match)

    def transformed(self, G, g, scale: float = 1.0) -> "Scene":
        """Apply ``X -> scale * (G X + g)`` to every camera and the triple point."""
        cams = [CalibratedCamera(c.id, c.pose.transformed(G, g, scale)) for c in self.cameras]
        triple = None
        if self.triple_match is not None:
            P = scale * (np.asarray(G) @ self.triple_match.point3d + np.asarray(g))
            triple = TripleMatch(P, self.triple_match.target_point)
        return Scene(cams, list(self.matches), triple)


def build_constraint(match: MatchPair, ref: CalibratedCamera, normalize: bool = True) -> ConstraintCoefficients:
    """Known vectors ``(p, s, b)`` with ``p^T R^T (s x t + b) = 0`` at the true pose.

    With ``normalize`` the image points are scaled to unit length first; the
    constraint is homogeneous in both points so this only changes conditioning.
    """
    if match.ref_camera != ref.id:
        raise ValueError(f"match refers to camera {match.ref_camera!r}, got camera {ref.id!r}")
    p = match.target_point
    pp = match.ref_point
    if normalize:
        p = p / np.linalg.norm(p)
        pp = pp / np.linalg.norm(pp)
    Ri = ref.pose.matrix
    ray = Ri @ pp
    return ConstraintCoefficients(p.copy(), -ray, -np.cross(ref.pose.translation, ray))


def constraint_residual(pose: Pose, c: ConstraintCoefficients) -> float:
    """Signed residual ``p^T R^T (s x t + b)``."""
    return float(c.p @ pose.matrix.T @ (np.cross(c.s, pose.translation) + c.b))


def quaternion_residual(q: Quaternion, t, c: ConstraintCoefficients) -> float:
    """Same constraint written with conjugation: ``vec(q p q*)^T (s x t + b)``."""
    qa = q.as_array()
    rotated = hamilton_tuple(hamilton_tuple(qa, (0.0, *c.p)), (qa[0], *-qa[1:]))
    return float(np.dot(rotated[1:], np.cross(c.s, np.asarray(t, dtype=float)) + c.b))


def essential_from_poses(new_pose: Pose, ref_pose: Pose) -> np.ndarray:
    """``R^T ([t]x - [t_i]x) R_i`` so that ``p^T E p' = 0`` for matches."""
    return new_pose.matrix.T @ (skew(new_pose.translation) - skew(ref_pose.translation)) @ ref_pose.matrix


def sampson_error(E, p, pp) -> float:
    """First-order geometric error of the epipolar constraint ``p^T E pp``.

    Returns ``inf`` when the epipolar lines of the pair are undefined.
    """
    p = _homogeneous(p)
    pp = _homogeneous(pp)
    Ep = E @ pp
    Etp = E.T @ p
    den = Ep[0] ** 2 + Ep[1] ** 2 + Etp[0] ** 2 + Etp[1] ** 2
    if den < TOL.sampson_denominator:
        return float("inf")
    return float((p @ Ep) ** 2 / den)


def sampson_errors(E, P, PP) -> np.ndarray:
    """Vectorised ``sampson_error`` over rows of ``P`` and ``PP``."""
    P = np.asarray(P, dtype=float)
    PP = np.asarray(PP, dtype=float)
    Ep = PP @ E.T
    Etp = P @ E
    num = np.einsum("ij,ij->i", P, Ep) ** 2
    den = Ep[:, 0] ** 2 + Ep[:, 1] ** 2 + Etp[:, 0] ** 2 + Etp[:, 1] ** 2
    out = np.full(len(P), np.inf)
    ok = den >= TOL.sampson_denominator
    out[ok] = num[ok] / den[ok]
    return out


def triangulate_midpoint(poses: Sequence[Pose], points: Sequence) -> np.ndarray:
    """Least-squares intersection of the viewing rays of two or more cameras."""
    A = np.zeros((3, 3))
    rhs = np.zeros(3)
    for pose, pt in zip(poses, points):
        d = pose.matrix @ _homogeneous(pt)
        d = d / np.linalg.norm(d)
        proj = np.eye(3) - np.outer(d, d)
        A += proj
        rhs += proj @ pose.translation
    return np.linalg.solve(A, rhs)
