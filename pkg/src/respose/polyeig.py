"""Polynomial eigenvalue problems ``M(z) v = 0`` and univariate root finding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

FINITE_TOL = 1e-10
REAL_TOL = 1e-6
RESIDUAL_TOL = 1e-6
DYNAMIC_RANGE_LIMIT = 1e12


class EigenSolverError(RuntimeError):
    pass


def _coefficients(pencil) -> np.ndarray:
    M = getattr(pencil, "M", pencil)
    M = np.asarray(M, dtype=float)
    if M.ndim != 3 or M.shape[1] != M.shape[2]:
        raise ValueError("expected coefficient matrices of shape (k + 1, N, N)")
    if M.shape[0] < 2:
        raise ValueError("matrix polynomial must have degree >= 1")
    return M


def evaluate_matrix_polynomial(M: np.ndarray, z) -> np.ndarray:
    out = np.zeros(M.shape[1:], dtype=np.result_type(z, M))
    for Mi in M[::-1]:
        out = out * z + Mi
    return out


@dataclass(frozen=True)
class CompanionPencil:
    """``C2 w = z C1 w`` with ``w = (v, z v, ..., z^(k-1) v)``."""

    C1: np.ndarray
    C2: np.ndarray
    block_size: int
    degree: int
    coefficients: np.ndarray


def linearize(pencil) -> CompanionPencil:
    M = _coefficients(pencil)
    k = M.shape[0] - 1
    N = M.shape[1]
    C1 = np.eye(N * k)
    C1[-N:, -N:] = M[k]
    C2 = np.zeros((N * k, N * k))
    C2[:-N, N:] = np.eye(N * (k - 1))
    C2[-N:, :] = -np.hstack(list(M[:k]))
    return CompanionPencil(C1, C2, N, k, M)


def generalized_eigenvalues(cp: CompanionPencil, right: bool = False):
    """Homogeneous eigenvalues ``(alpha, beta)`` and optionally eigenvectors."""
    try:
        out = scipy.linalg.eig(cp.C2, cp.C1, homogeneous_eigvals=True, right=right)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"generalized eigen-decomposition failed: {exc}") from exc
    if right:
        (alpha, beta), V = out
        return alpha, beta, V
    alpha, beta = out
    return alpha, beta


def finite_mask(alpha, beta, tol: float = FINITE_TOL) -> np.ndarray:
    return np.abs(beta) > tol * (np.abs(alpha) + np.abs(beta))


def is_real(z, tol: float = REAL_TOL) -> bool:
    return abs(np.imag(z)) < tol * (1.0 + abs(np.real(z)))


@dataclass(frozen=True)
class EigenSolution:
    q2: complex
    vector: np.ndarray
    finite: bool
    residual: float
    singular_values: np.ndarray  # of M(q2), descending, divided by the largest

    @property
    def is_real(self) -> bool:
        return is_real(self.q2)

    @property
    def nullity_gap(self) -> float:
        """Ratio of the second-smallest to the largest singular value."""
        return float(self.singular_values[-2])


def null_vector(Mz: np.ndarray):
    """Null-vector estimate (scaled to a leading 1 when possible) and the
    singular values of ``Mz`` divided by the largest."""
    _, sv, Vh = np.linalg.svd(Mz)
    v = Vh[-1].conj()
    scale = sv[0] if sv[0] > 0 else 1.0
    if abs(v[0]) > 1e-10 * np.linalg.norm(v):
        v = v / v[0]
    return v, sv / scale


def pencil_residual(M: np.ndarray, z, v) -> float:
    """``|M(z) v| / (sum_i |M_i| |z|^i * |v|)``."""
    norms = np.linalg.norm(M, axis=(1, 2))
    scale = np.polyval(norms[::-1], abs(z)) * np.linalg.norm(v)
    return float(np.linalg.norm(evaluate_matrix_polynomial(M, z) @ v) / scale) if scale > 0 else 0.0


def solve_generalized(
    cp: CompanionPencil,
    *,
    finite_tol: float = FINITE_TOL,
    residual_tol: float = RESIDUAL_TOL,
    only_real: bool = False,
) -> list[EigenSolution]:
    """Finite eigenpairs of the matrix polynomial behind ``cp``.

    Eigenvalues come from the QZ decomposition of the companion pencil.  The
    vector of each one is the null vector of ``M(q2)`` from an SVD, which is
    cheaper than QZ eigenvectors and stays accurate for clustered roots.
    An empty list means the pencil has no finite eigenvalues.
    """
    alpha, beta = generalized_eigenvalues(cp)
    fin = finite_mask(alpha, beta, finite_tol)
    out = []
    for z in alpha[fin] / beta[fin]:
        if only_real and not is_real(z):
            continue
        zz = complex(z)
        zeval = zz.real if is_real(zz, 1e-14) else zz
        v, sv = null_vector(evaluate_matrix_polynomial(cp.coefficients, zeval))
        res = pencil_residual(cp.coefficients, zeval, v)
        if res < residual_tol:
            out.append(EigenSolution(zz, v, True, res, sv))
    return out


def finite_eigenvalues(cp: CompanionPencil, finite_tol: float = FINITE_TOL) -> np.ndarray:
    alpha, beta = generalized_eigenvalues(cp)
    fin = finite_mask(alpha, beta, finite_tol)
    return alpha[fin] / beta[fin]


# determinant interpolation ----------------------------------------------------


@dataclass(frozen=True)
class DeterminantRoots:
    roots: np.ndarray
    ill_conditioned: bool
    dynamic_range: float
    converged: bool


def _log_derivative(M: np.ndarray, dM: np.ndarray, z: complex) -> complex:
    """``p'(z) / p(z)`` for ``p = det M`` via ``tr(M^-1 M')``."""
    A = evaluate_matrix_polynomial(M, z)
    B = evaluate_matrix_polynomial(dM, z)
    return complex(np.trace(np.linalg.solve(A, B)))


def det_interpolation_roots(
    pencil,
    *,
    degree: int | None = None,
    n_samples: int | None = None,
    max_iter: int = 200,
    tol: float = 1e-13,
) -> DeterminantRoots:
    """Roots of ``det M(z)`` without going through a companion pencil.

    ``det M`` is sampled on a circle (roots-of-unity nodes, the complex
    counterpart of Chebyshev points) and its monomial coefficients follow from
    an FFT.  The circle radius is re-chosen until the lowest and highest
    coefficients balance.  The roots of the interpolant then seed a
    simultaneous Aberth-Ehrlich refinement that only evaluates ``det M``
    through its log-derivative, which repairs the roots far from the sampling
    circle that interpolation alone resolves poorly.

    ``degree`` is the known degree of the determinant; when omitted it is
    read off the interpolated coefficients, which is only reliable when the
    roots have comparable magnitudes.
    """
    M = _coefficients(pencil)
    k = M.shape[0] - 1
    N = M.shape[1]
    n = n_samples or max(N * k + 1, 2 * (degree or 0) + 1)

    def interpolate(r):
        nodes = r * np.exp(2j * np.pi * np.arange(n) / n)
        signs = np.empty(n, dtype=complex)
        logs = np.empty(n)
        for i, z in enumerate(nodes):
            signs[i], logs[i] = np.linalg.slogdet(evaluate_matrix_polynomial(M, z))
        ok = np.isfinite(logs)
        spread = float(np.exp(min(np.ptp(logs[ok]), 700.0))) if ok.any() else np.inf
        coeffs = np.fft.fft(signs * np.exp(logs - logs[ok].max())) / n
        if degree is None:
            mags = np.abs(coeffs)
            d = int(np.flatnonzero(mags > 1e-12 * mags.max()).max())
        else:
            d = degree
        return coeffs[: d + 1], spread

    radius = 1.0
    coeffs, dynamic_range = interpolate(radius)
    for _ in range(4):
        if len(coeffs) < 2 or coeffs[0] == 0 or coeffs[-1] == 0:
            break
        r = radius * (abs(coeffs[0]) / abs(coeffs[-1])) ** (1.0 / (len(coeffs) - 1))
        if 0.5 < r / radius < 2.0:
            break
        radius = r
        coeffs, dynamic_range = interpolate(radius)
    if len(coeffs) == 1:
        return DeterminantRoots(np.zeros(0, complex), dynamic_range > DYNAMIC_RANGE_LIMIT, dynamic_range, True)
    z = np.roots(coeffs[::-1]) * radius

    dM = M[1:] * np.arange(1, k + 1)[:, None, None]
    done = np.zeros(len(z), bool)
    for _ in range(max_iter):
        for i in np.flatnonzero(~done):
            try:
                g = _log_derivative(M, dM, z[i])
            except np.linalg.LinAlgError:
                done[i] = True
                continue
            if g == 0:
                done[i] = True
                continue
            ratio = 1.0 / g
            others = np.delete(z, i)
            step = ratio / (1.0 - ratio * np.sum(1.0 / (z[i] - others)))
            z[i] -= step
            if abs(step) < tol * (1.0 + abs(z[i])):
                done[i] = True
        if done.all():
            break
    flag = dynamic_range > DYNAMIC_RANGE_LIMIT or not done.all()
    return DeterminantRoots(z, flag, dynamic_range, bool(done.all()))


# univariate ---------------------------------------------------------------------


def real_roots_univariate(coeffs: Sequence[float], imag_tol: float = 1e-8, newton_steps: int = 2) -> np.ndarray:
    """Real roots of ``sum(coeffs[i] * x**i)`` (ascending powers), sorted.

    Roots come from companion-matrix eigenvalues.  A tight cloud of complex
    roots whose centroid is real and satisfies the polynomial to working
    precision is reported once as a multiple root.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if c.size == 0:
        raise ValueError("the zero polynomial has no isolated roots")
    if c.size == 1:
        return np.zeros(0)
    poly = np.polynomial.Polynomial(c)
    deriv = poly.deriv()
    roots = poly.roots().astype(complex)
    absc = np.abs(c)

    def backward_error(x):
        return abs(poly(x)) / np.polyval(absc[::-1], abs(x))

    def real_enough(x):
        return abs(x.imag) < imag_tol * (1.0 + abs(x.real))

    # group roots that sit within a small disc of each other
    groups: list[list[int]] = []
    for i, r in enumerate(roots):
        for g in groups:
            if any(abs(r - roots[j]) < 1e-2 * (1.0 + abs(r)) for j in g):
                g.append(i)
                break
        else:
            groups.append([i])

    found = []
    for g in groups:
        members = roots[g]
        if len(g) > 1 and not all(real_enough(m) for m in members):
            centroid = members.mean()
            if real_enough(centroid) and backward_error(centroid.real) < 1e-10:
                found.append(centroid.real)
                continue
        for m in members:
            if not real_enough(m):
                continue
            x = m.real
            for _ in range(newton_steps):
                d = deriv(x)
                if d == 0:
                    break
                step = poly(x) / d
                if not np.isfinite(step):
                    break
                x -= step
            found.append(x)
    return np.sort(np.array(found, dtype=float))
