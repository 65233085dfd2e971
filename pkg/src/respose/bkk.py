"""Root-count bounds for the pose systems: Bezout numbers and BKK mixed volumes.

Supports are read off symbolic expansions (sympy) so that they reflect the
structure of the equations, not accidental zeros in numeric coefficients.
Mixed volumes use convex-hull volumes from Qhull.  For a lattice polytope in
dimension ``m``, ``m! * volume`` is an integer, so each hull volume is snapped
to an exact :class:`~fractions.Fraction` before any further arithmetic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import sympy
from scipy.spatial import ConvexHull, QhullError

DRIFT_TOL = 0.01


class MixedVolumeError(ArithmeticError):
    """A hull volume or mixed volume failed to land on the integer lattice."""


@dataclass(frozen=True)
class NewtonPolytope:
    support: frozenset
    dim: int

    def __post_init__(self):
        if not self.support:
            raise ValueError("a Newton polytope needs a nonempty support")
        if any(len(a) != self.dim for a in self.support):
            raise ValueError("support vectors must all have length dim")
        if any(v < 0 for a in self.support for v in a):
            raise ValueError("exponents must be non-negative")

    @classmethod
    def from_points(cls, points: Iterable[Sequence[int]]) -> "NewtonPolytope":
        pts = frozenset(tuple(int(v) for v in p) for p in points)
        dim = len(next(iter(pts))) if pts else 0
        return cls(pts, dim)

    def array(self) -> np.ndarray:
        return np.array(sorted(self.support), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.support)


def newton_polytope(f, variables: Sequence) -> NewtonPolytope:
    """Support of a sympy expression in ``variables``.

    Everything else in ``f`` is treated as a symbolic coefficient, so an
    exponent vector is kept exactly when its coefficient is not identically
    zero.
    """
    poly = sympy.Poly(sympy.expand(f), *variables)
    support = [m for m, c in zip(poly.monoms(), poly.coeffs()) if c != 0]
    if not support:
        support = [(0,) * len(variables)]
    return NewtonPolytope.from_points(support)


def bezout_bound(degrees: Sequence[int]) -> int:
    return math.prod(int(d) for d in degrees)


# volumes ------------------------------------------------------------------------


def _affine_rank(points: np.ndarray) -> int:
    if len(points) <= 1:
        return 0
    return int(np.linalg.matrix_rank((points - points[0]).astype(float)))


def lattice_volume(points: np.ndarray) -> Fraction:
    """Exact volume of the hull of integer points, via a rounded Qhull volume."""
    points = np.unique(np.asarray(points, dtype=np.int64), axis=0)
    m = points.shape[1]
    if _affine_rank(points) < m:
        return Fraction(0)
    if m == 1:
        return Fraction(int(points.max() - points.min()))
    try:
        vol = ConvexHull(points.astype(float)).volume
    except QhullError:
        # joggle instead of failing on coplanar facets
        vol = ConvexHull(points.astype(float), qhull_options="QJ").volume
    scaled = vol * math.factorial(m)
    k = round(scaled)
    if abs(scaled - k) > DRIFT_TOL:
        raise MixedVolumeError(f"hull volume times {m}! is {scaled}, not an integer")
    return Fraction(k, math.factorial(m))


def _hull_vertices(points: np.ndarray) -> np.ndarray:
    points = np.unique(np.asarray(points, dtype=np.int64), axis=0)
    if points.shape[1] == 1:
        return np.unique(points[[0, -1]], axis=0)
    if len(points) <= points.shape[1] + 1 or _affine_rank(points) < points.shape[1]:
        return points
    try:
        return points[ConvexHull(points.astype(float)).vertices]
    except QhullError:
        return points


def minkowski_sum(*point_sets: np.ndarray) -> np.ndarray:
    """Pairwise sums of hull vertices, reduced to the hull vertices of the sum."""
    acc = np.zeros((1, point_sets[0].shape[1]), dtype=np.int64)
    for pts in point_sets:
        v = _hull_vertices(pts)
        acc = _hull_vertices((acc[:, None, :] + v[None, :, :]).reshape(-1, acc.shape[1]))
    return acc


def _scaled_sum(bodies: Sequence[np.ndarray], weights: Sequence[int]) -> np.ndarray:
    terms = [w * b for b, w in zip(bodies, weights) if w]
    if not terms:
        return np.zeros((1, bodies[0].shape[1]), dtype=np.int64)
    return minkowski_sum(*terms)


def _check_dims(polytopes: Sequence[NewtonPolytope]) -> int:
    m = len(polytopes)
    if m == 0:
        raise ValueError("need at least one polytope")
    if any(p.dim != m for p in polytopes):
        raise ValueError(f"mixed volume needs {m} polytopes in dimension {m}")
    return m


def _to_int(value: Fraction) -> int:
    k = round(value)
    if abs(value - k) > DRIFT_TOL:
        raise MixedVolumeError(f"mixed volume {float(value)} is not an integer")
    return int(k)


def _groups(polytopes: Sequence[NewtonPolytope]):
    bodies, counts = [], []
    for p in polytopes:
        for i, q in enumerate(bodies):
            if q == p:
                counts[i] += 1
                break
        else:
            bodies.append(p)
            counts.append(1)
    return bodies, counts


def mixed_volume_inclusion_exclusion(polytopes: Sequence[NewtonPolytope]) -> int:
    """Brute-force alternating sum over all nonempty subsets of the bodies.

    Cost grows like ``2^m`` hull computations; meant as a reference for small
    dimensions.
    """
    m = _check_dims(polytopes)
    arrays = [p.array() for p in polytopes]
    total = Fraction(0)
    for k in range(1, m + 1):
        for subset in itertools.combinations(range(m), k):
            total += (-1) ** (m - k) * lattice_volume(minkowski_sum(*(arrays[i] for i in subset)))
    return _to_int(total)


def _grouped_inclusion_exclusion(bodies, counts) -> Fraction:
    """Alternating subset sum with equal bodies merged: a subset taking
    ``j_i`` copies of body ``i`` occurs ``prod C(m_i, j_i)`` times."""
    m = sum(counts)
    arrays = [b.array() for b in bodies]
    total = Fraction(0)
    for js in itertools.product(*(range(c + 1) for c in counts)):
        k = sum(js)
        if k == 0:
            continue
        mult = math.prod(math.comb(c, j) for c, j in zip(counts, js))
        total += (-1) ** (m - k) * mult * lattice_volume(_scaled_sum(arrays, js))
    return total


def _volume_polynomial_two(P: NewtonPolytope, Q: NewtonPolytope, s: int, m: int) -> Fraction:
    """``MV(P^s, Q^(m-s))`` from ``Vol(lambda P + Q)`` at ``lambda = 0..m``.

    ``Vol(lambda P + mu Q) = sum_j MV(P^j, Q^(m-j)) / (j! (m-j)!) lambda^j mu^(m-j)``,
    so with ``mu = 1`` the coefficients follow from an exact Vandermonde solve.
    """
    A, B = P.array(), Q.array()
    nodes = list(range(m + 1))
    values = [lattice_volume(_scaled_sum([A, B], [lam, 1])) for lam in nodes]
    coeffs = _solve_vandermonde(nodes, values)
    return coeffs[s] * math.factorial(s) * math.factorial(m - s)


def _solve_vandermonde(nodes: Sequence[int], values: Sequence[Fraction]) -> list:
    """Monomial coefficients (ascending) of the exact interpolating polynomial."""
    lam = sympy.Symbol("lam")
    pts = [(sympy.Integer(x), sympy.Rational(v.numerator, v.denominator)) for x, v in zip(nodes, values)]
    poly = sympy.Poly(sympy.interpolate(pts, lam), lam)
    coeffs = [Fraction(int(c.p), int(c.q)) for c in reversed(poly.all_coeffs())]
    return coeffs + [Fraction(0)] * (len(nodes) - len(coeffs))


def mixed_volume(polytopes: Sequence[NewtonPolytope]) -> int:
    """Mixed volume normalised so that ``MV(P, ..., P) = m! Vol(P)``.

    One distinct body uses ``m! Vol(P)``; two use the volume polynomial of
    ``lambda P + mu Q``; more fall back to inclusion-exclusion grouped over
    equal bodies.
    """
    m = _check_dims(polytopes)
    if m > 7:
        raise ValueError("mixed volumes are supported up to dimension 7")
    bodies, counts = _groups(polytopes)
    if len(bodies) == 1:
        value = math.factorial(m) * lattice_volume(bodies[0].array())
    elif len(bodies) == 2:
        value = _volume_polynomial_two(bodies[0], bodies[1], counts[0], m)
    else:
        value = _grouped_inclusion_exclusion(bodies, counts)
    return _to_int(value)


# the pose systems -------------------------------------------------------------------


def _quaternion_symbols():
    q2, q3, q4 = sympy.symbols("q2 q3 q4")
    return (sympy.Integer(1), q2, q3, q4), (q2, q3, q4)


def _rotation_homogeneous(q):
    w, x, y, z = q
    return sympy.Matrix(
        [
            [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
        ]
    )


def _hamilton(a, b):
    a1, a2, a3, a4 = a
    b1, b2, b3, b4 = b
    return (
        a1 * b1 - a2 * b2 - a3 * b3 - a4 * b4,
        a1 * b2 + a2 * b1 + a3 * b4 - a4 * b3,
        a1 * b3 - a2 * b4 + a3 * b1 + a4 * b2,
        a1 * b4 + a2 * b3 - a3 * b2 + a4 * b1,
    )


def pose_polynomial_rt(tag: int = 0):
    """Rotation-translation form ``p^T Rh(q)^T (s x t + b)`` with ``q1 = 1`` and
    ``Rh = |q|^2 R``; unknowns ``(q2, q3, q4, t1, t2, t3)``."""
    q, qv = _quaternion_symbols()
    t = sympy.Matrix(sympy.symbols("t1 t2 t3"))
    p = sympy.Matrix(sympy.symbols(f"p1_{tag} p2_{tag} p3_{tag}"))
    s = sympy.Matrix(sympy.symbols(f"s1_{tag} s2_{tag} s3_{tag}"))
    b = sympy.Matrix(sympy.symbols(f"b1_{tag} b2_{tag} b3_{tag}"))
    expr = (p.T * _rotation_homogeneous(q).T * (s.cross(t) + b))[0]
    return expr, tuple(qv) + tuple(t)


def pose_polynomial_dq(tag: int = 0, with_b: bool = True):
    """Bilinear form ``s . vec(d p q*) + b . vec(q p q*)`` with ``q1 = 1``;
    unknowns ``(d1, d2, d3, d4, q2, q3, q4)``.  ``with_b=False`` is a match
    from a camera centred at the origin, where ``b`` vanishes."""
    q, qv = _quaternion_symbols()
    d = sympy.symbols("d1 d2 d3 d4")
    p = (0, *sympy.symbols(f"p1_{tag} p2_{tag} p3_{tag}"))
    s = sympy.symbols(f"s1_{tag} s2_{tag} s3_{tag}")
    qc = (q[0], -q[1], -q[2], -q[3])
    dpq = _hamilton(_hamilton(d, p), qc)[1:]
    expr = sum(si * v for si, v in zip(s, dpq))
    if with_b:
        b = sympy.symbols(f"b1_{tag} b2_{tag} b3_{tag}")
        qpq = _hamilton(_hamilton(q, p), qc)[1:]
        expr += sum(bi * v for bi, v in zip(b, qpq))
    return expr, tuple(d) + tuple(qv)


def gauge_polynomial_dq():
    q, qv = _quaternion_symbols()
    d = sympy.symbols("d1 d2 d3 d4")
    return sum(a * c for a, c in zip(d, q)), tuple(d) + tuple(qv)


def rt_system_polytopes() -> list:
    """Six identical polytopes of the rotation-translation form, dimension 6."""
    out = []
    for k in range(6):
        f, xs = pose_polynomial_rt(k)
        out.append(newton_polytope(f, xs))
    return out


def dq_system_polytopes(n_without_b: int = 0) -> list:
    """Six bilinear constraints (the first ``n_without_b`` without ``b``) and
    the gauge condition, dimension 7."""
    out = []
    for k in range(6):
        f, xs = pose_polynomial_dq(k, with_b=k >= n_without_b)
        out.append(newton_polytope(f, xs))
    g, xs = gauge_polynomial_dq()
    out.append(newton_polytope(g, xs))
    return out


@dataclass(frozen=True)
class BoundReport:
    name: str
    value: int
    expected: int

    @property
    def ok(self) -> bool:
        return self.value == self.expected


EXPECTED_BOUNDS = {
    "bezout_rt_cubics": 729,
    "bezout_dq_quadratics": 128,
    "bkk_rt": 160,
    "bkk_dq": 64,
    "bkk_dq_four_two": 40,
}


def verify_bounds(polytope_hook=None) -> list:
    """Compute the five bounds.  ``polytope_hook(name, polytopes)`` may replace
    the supports before the mixed volume is taken (used for fault injection)."""
    hook = polytope_hook or (lambda name, polys: polys)
    rt = hook("bkk_rt", rt_system_polytopes())
    dq = hook("bkk_dq", dq_system_polytopes())
    dq42 = hook("bkk_dq_four_two", dq_system_polytopes(n_without_b=4))
    values = {
        "bezout_rt_cubics": bezout_bound([3] * 6),
        "bezout_dq_quadratics": bezout_bound([2] * 7),
        "bkk_rt": mixed_volume(rt),
        "bkk_dq": mixed_volume(dq),
        "bkk_dq_four_two": mixed_volume(dq42),
    }
    return [BoundReport(k, values[k], EXPECTED_BOUNDS[k]) for k in EXPECTED_BOUNDS]


def random_lattice_polytope(rng: np.random.Generator, dim: int, n_points: int = 6, box: int = 3) -> NewtonPolytope:
    return NewtonPolytope.from_points(rng.integers(0, box + 1, size=(n_points, dim)))


__all__ = [
    "BoundReport",
    "EXPECTED_BOUNDS",
    "MixedVolumeError",
    "NewtonPolytope",
    "bezout_bound",
    "dq_system_polytopes",
    "gauge_polynomial_dq",
    "lattice_volume",
    "minkowski_sum",
    "mixed_volume",
    "mixed_volume_inclusion_exclusion",
    "newton_polytope",
    "pose_polynomial_dq",
    "pose_polynomial_rt",
    "random_lattice_polytope",
    "rt_system_polytopes",
    "verify_bounds",
]
