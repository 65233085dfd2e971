"""Sparse polynomials over the twelve elimination variables.

Variables are ``x1..x6`` (indices 0-5) and their Dixon duplicates ``y1..y6``
(indices 6-11).  Every coefficient is itself a dense polynomial in the hidden
variable ``q2``, stored as a row of powers ``[c0, c1, ...]``.

A polynomial is a pair of arrays: ``codes`` (packed exponent vectors, sorted,
unique) and ``coeffs`` of shape ``(n_terms, hidden_degree + 1)``.  All
arithmetic is vectorised over terms, which keeps the per-instance Dixon
construction fast enough to run inside a solver loop.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

NVARS = 12
NX = 6
_BITS = 5
_FIELD = (1 << _BITS) - 1
_SHIFTS = np.arange(NVARS, dtype=np.int64) * _BITS

# Terms whose largest |coefficient| falls below DROP_TOL times the largest
# coefficient of the polynomial are discarded after every operation.
DROP_TOL = 1e-13

VAR_NAMES = tuple(f"x{i + 1}" for i in range(NX)) + tuple(f"y{i + 1}" for i in range(NX))


def encode(exponents: Sequence[int]) -> int:
    if len(exponents) != NVARS:
        raise ValueError(f"expected {NVARS} exponents, got {len(exponents)}")
    code = 0
    for i, e in enumerate(exponents):
        if not 0 <= e <= _FIELD:
            raise ValueError(f"exponent {e} out of range")
        code |= int(e) << (_BITS * i)
    return code


def decode(code: int) -> tuple[int, ...]:
    return tuple((int(code) >> (_BITS * i)) & _FIELD for i in range(NVARS))


def exponent_matrix(codes: np.ndarray) -> np.ndarray:
    """Unpack an array of codes into an ``(n, 12)`` exponent matrix."""
    codes = np.asarray(codes, dtype=np.int64)
    return (codes[:, None] >> _SHIFTS[None, :]) & _FIELD


def grlex_key(exponents: Sequence[int]) -> tuple:
    """Sort key for graded lexicographic order with ``x1 > x2 > ... > y6``."""
    return (sum(exponents), tuple(-e for e in exponents))


def _combine(codes: np.ndarray, coeffs: np.ndarray, tol: float = DROP_TOL):
    """Merge duplicate codes, drop negligible terms, trim the hidden degree."""
    if codes.size == 0:
        return np.zeros(0, np.int64), np.zeros((0, 1))
    order = np.argsort(codes, kind="stable")
    sc = codes[order]
    starts = np.flatnonzero(np.r_[True, sc[1:] != sc[:-1]])
    summed = np.add.reduceat(coeffs[order], starts, axis=0)
    return _prune(sc[starts], summed, tol)


def _prune(codes: np.ndarray, coeffs: np.ndarray, tol: float = DROP_TOL):
    mags = np.abs(coeffs).max(axis=1) if coeffs.shape[1] else np.zeros(len(codes))
    top = mags.max() if mags.size else 0.0
    keep = mags > tol * top if top > 0 else np.zeros(len(codes), bool)
    codes, coeffs = codes[keep], coeffs[keep]
    if coeffs.size:
        col = np.abs(coeffs).max(axis=0)
        nz = np.flatnonzero(col > 0)
        width = nz[-1] + 1 if nz.size else 1
        coeffs = coeffs[:, :width]
    else:
        coeffs = np.zeros((0, 1))
    return codes, np.ascontiguousarray(coeffs)


def _pad(coeffs: np.ndarray, width: int) -> np.ndarray:
    if coeffs.shape[1] == width:
        return coeffs
    out = np.zeros((coeffs.shape[0], width))
    out[:, : coeffs.shape[1]] = coeffs
    return out


def _conv_products(ca: np.ndarray, cb: np.ndarray) -> np.ndarray:
    """All pairwise products of hidden-variable polynomials, ``(na*nb, K)``."""
    na, ka = ca.shape
    nb, kb = cb.shape
    out = np.zeros((na, nb, ka + kb - 1))
    for i in range(ka):
        out[:, :, i : i + kb] += ca[:, None, i, None] * cb[None, :, :]
    return out.reshape(na * nb, ka + kb - 1)


class MPoly:
    """Immutable sparse polynomial with ``q2``-polynomial coefficients."""

    __slots__ = ("codes", "coeffs")

    def __init__(self, codes, coeffs, *, canonical: bool = False):
        codes = np.asarray(codes, dtype=np.int64).reshape(-1)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim == 1:
            coeffs = coeffs.reshape(len(codes), -1) if len(codes) else np.zeros((0, 1))
        if not canonical:
            codes, coeffs = _combine(codes, coeffs)
        self.codes = codes
        self.coeffs = coeffs

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls) -> "MPoly":
        return cls(np.zeros(0, np.int64), np.zeros((0, 1)), canonical=True)

    @classmethod
    def constant(cls, hidden_coeffs) -> "MPoly":
        c = np.atleast_1d(np.asarray(hidden_coeffs, dtype=float))
        return cls(np.zeros(1, np.int64), c[None, :])

    @classmethod
    def variable(cls, index: int) -> "MPoly":
        if not 0 <= index < NVARS:
            raise IndexError(index)
        return cls(np.array([1 << (_BITS * index)], np.int64), np.ones((1, 1)), canonical=True)

    @classmethod
    def from_terms(cls, terms: Mapping[Sequence[int], Iterable[float]]) -> "MPoly":
        if not terms:
            return cls.zero()
        codes = [encode(e) for e in terms]
        rows = [np.atleast_1d(np.asarray(c, dtype=float)) for c in terms.values()]
        width = max(len(r) for r in rows)
        coeffs = np.zeros((len(rows), width))
        for i, r in enumerate(rows):
            coeffs[i, : len(r)] = r
        return cls(np.array(codes, np.int64), coeffs)

    # inspection ---------------------------------------------------------
    def __len__(self) -> int:
        return len(self.codes)

    @property
    def is_zero(self) -> bool:
        return len(self.codes) == 0

    @property
    def hidden_degree(self) -> int:
        return self.coeffs.shape[1] - 1 if len(self.codes) else -1

    def exponents(self) -> np.ndarray:
        return exponent_matrix(self.codes)

    def terms(self) -> dict[tuple[int, ...], np.ndarray]:
        return {decode(c): row.copy() for c, row in zip(self.codes, self.coeffs)}

    def coefficient(self, exponents: Sequence[int]) -> np.ndarray:
        code = encode(exponents)
        i = np.searchsorted(self.codes, code)
        if i < len(self.codes) and self.codes[i] == code:
            return self.coeffs[i].copy()
        return np.zeros(1)

    def degree_in(self, index: int) -> int:
        if self.is_zero:
            return -1
        return int(((self.codes >> (_BITS * index)) & _FIELD).max())

    def max_abs(self) -> float:
        return float(np.abs(self.coeffs).max()) if len(self.codes) else 0.0

    def __repr__(self) -> str:
        return f"MPoly({len(self.codes)} terms, hidden degree {self.hidden_degree})"

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __neg__(self):
        return MPoly(self.codes, -self.coeffs, canonical=True)

    def __sub__(self, other):
        return add(self, -_lift(other))

    def __rsub__(self, other):
        return add(_lift(other), -self)

    def __mul__(self, other):
        if isinstance(other, MPoly):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __call__(self, x_point, q2):
        return eval_poly(self, x_point, q2)


def _lift(value) -> MPoly:
    if isinstance(value, MPoly):
        return value
    return MPoly.constant([float(value)])


def scale(a: MPoly, factor: float) -> MPoly:
    if factor == 0.0:
        return MPoly.zero()
    return MPoly(a.codes, a.coeffs * factor, canonical=True)


def add(a: MPoly, b: MPoly) -> MPoly:
    width = max(a.coeffs.shape[1], b.coeffs.shape[1])
    codes = np.concatenate([a.codes, b.codes])
    coeffs = np.vstack([_pad(a.coeffs, width), _pad(b.coeffs, width)])
    return MPoly(codes, coeffs)


def mul(a: MPoly, b: MPoly) -> MPoly:
    if a.is_zero or b.is_zero:
        return MPoly.zero()
    codes = (a.codes[:, None] + b.codes[None, :]).reshape(-1)
    return MPoly(codes, _conv_products(a.coeffs, b.coeffs))


def substitute_y(f: MPoly, index: int) -> MPoly:
    """Rename ``x_{index}`` to its duplicate ``y_{index}``."""
    if not 0 <= index < NX:
        raise IndexError(index)
    e = (f.codes >> (_BITS * index)) & _FIELD
    codes = f.codes - (e << (_BITS * index)) + (e << (_BITS * (index + NX)))
    return MPoly(codes, f.coeffs.copy())


def divided_difference(f: MPoly, index: int) -> MPoly:
    """``(f - f|x_i->y_i) / (x_i - y_i)`` computed term by term.

    ``f`` must not already contain ``y_i``; the quotient is then exact, using
    ``x^a - y^a = (x - y)(x^(a-1) + x^(a-2) y + ... + y^(a-1))``.
    """
    if not 0 <= index < NX:
        raise IndexError(index)
    if f.is_zero:
        return MPoly.zero()
    ybits = (f.codes >> (_BITS * (index + NX))) & _FIELD
    if np.any(ybits):
        raise ValueError(f"polynomial already depends on y{index + 1}")
    e = (f.codes >> (_BITS * index)) & _FIELD
    base = f.codes - (e << (_BITS * index))
    codes, rows = [], []
    for j in range(int(e.max()) if e.size else 0):
        sel = e > j
        if not np.any(sel):
            continue
        codes.append(base[sel] + (j << (_BITS * index)) + ((e[sel] - 1 - j) << (_BITS * (index + NX))))
        rows.append(f.coeffs[sel])
    if not codes:
        return MPoly.zero()
    return MPoly(np.concatenate(codes), np.vstack(rows))


def eval_poly(f: MPoly, x_point: Sequence[complex], q2: complex) -> complex:
    """Evaluate at a 12-vector of variable values and a hidden value ``q2``."""
    if f.is_zero:
        return 0.0
    pt = np.asarray(x_point)
    if pt.shape != (NVARS,):
        raise ValueError("x_point must have 12 entries")
    ex = f.exponents()
    mono = np.prod(pt[None, :] ** ex, axis=1)
    hidden = np.zeros(len(f.codes), dtype=np.result_type(pt, q2, float))
    for c in f.coeffs.T[::-1]:
        hidden = hidden * q2 + c
    return np.sum(mono * hidden)


# determinants --------------------------------------------------------------


def _check_grid(grid: Sequence[Sequence[MPoly]]) -> int:
    n = len(grid)
    if n == 0 or any(len(row) != n for row in grid):
        raise ValueError("grid must be square and non-empty")
    if n > 7:
        raise ValueError("memoized Laplace expansion supports at most 7x7")
    return n


def det_memoized_laplace(grid: Sequence[Sequence[MPoly]]) -> MPoly:
    """Determinant of a square grid of polynomials.

    Minors of the bottom ``k`` rows are built for every column subset of size
    ``k`` and reused by the next row up, so each of the ``C(n, k)`` minors is
    formed exactly once.
    """
    n = _check_grid(grid)
    memo: dict[int, MPoly] = {1 << j: grid[n - 1][j] for j in range(n)}
    for k in range(2, n + 1):
        r = n - k
        for cols in itertools.combinations(range(n), k):
            mask = sum(1 << j for j in cols)
            codes, parts = [], []
            for pos, j in enumerate(cols):
                a, sub = grid[r][j], memo[mask ^ (1 << j)]
                if a.is_zero or sub.is_zero:
                    continue
                codes.append((a.codes[:, None] + sub.codes[None, :]).reshape(-1))
                prod = _conv_products(a.coeffs, sub.coeffs)
                parts.append(-prod if pos % 2 else prod)
            if not parts:
                memo[mask] = MPoly.zero()
                continue
            width = max(p.shape[1] for p in parts)
            memo[mask] = MPoly(np.concatenate(codes), np.vstack([_pad(p, width) for p in parts]))
        for m in [m for m in memo if bin(m).count("1") == k - 1]:
            del memo[m]
    return memo[(1 << n) - 1]


def grid_signature(grid: Sequence[Sequence[MPoly]]) -> tuple:
    """Hashable sparsity pattern of a grid (codes and hidden degrees)."""
    return tuple((g.codes.tobytes(), g.coeffs.shape[1]) for row in grid for g in row)


@dataclass
class _MinorStep:
    mask: int
    out_codes: np.ndarray
    width: int
    parts: list  # (column, sub_mask, sign)
    order: np.ndarray
    starts: np.ndarray
    out_rows: np.ndarray


@dataclass
class LaplacePlan:
    """Replayable memoized Laplace expansion for one grid sparsity pattern.

    The plan is compiled once from random coefficients on the grid's support,
    so every term that can be nonzero for some coefficient values is kept.
    Replaying it on a grid with the same support only does numeric work.
    """

    n: int
    signature: tuple
    steps: list = field(default_factory=list)

    def evaluate(self, grid: Sequence[Sequence[MPoly]]) -> MPoly:
        if grid_signature(grid) != self.signature:
            raise ValueError("grid sparsity pattern does not match the plan")
        n = self.n
        memo: dict[int, np.ndarray] = {1 << j: grid[n - 1][j].coeffs for j in range(n)}
        codes = None
        for step in self.steps:
            r = n - bin(step.mask).count("1")
            chunks = []
            for j, sub_mask, sign in step.parts:
                prod = _conv_products(grid[r][j].coeffs, memo[sub_mask])
                chunks.append(_pad(-prod if sign < 0 else prod, step.width))
            flat = np.vstack(chunks)[step.order]
            out = np.zeros((len(step.out_codes), step.width))
            if len(step.order):
                out[step.out_rows] = np.add.reduceat(flat, step.starts, axis=0)
            memo[step.mask] = out
            codes = step.out_codes
        final = memo[(1 << n) - 1]
        return MPoly(*_prune(codes, final), canonical=True)


def compile_laplace_plan(grid: Sequence[Sequence[MPoly]], seed: int | None = 0) -> LaplacePlan:
    """Record the expansion of ``grid``.

    With an integer ``seed`` the coefficients are first replaced by random
    values on the same support, so the plan covers every grid with that
    support.  With ``seed=None`` the grid's own values are used and terms that
    cancel for it are left out of the plan; only do that for a grid whose
    cancellations are structural.
    """
    n = _check_grid(grid)
    if seed is None:
        generic = grid
    else:
        rng = np.random.default_rng(seed)
        generic = [
            [MPoly(g.codes, rng.uniform(0.5, 1.5, g.coeffs.shape) * rng.choice([-1, 1], g.coeffs.shape), canonical=True)
             for g in row]
            for row in grid
        ]
    plan = LaplacePlan(n=n, signature=grid_signature(grid))
    memo: dict[int, MPoly] = {1 << j: generic[n - 1][j] for j in range(n)}
    # widths of the untrimmed arrays that evaluate() will hold for each minor
    ewidth = {1 << j: grid[n - 1][j].coeffs.shape[1] for j in range(n)}
    for k in range(2, n + 1):
        r = n - k
        for cols in itertools.combinations(range(n), k):
            mask = sum(1 << j for j in cols)
            codes, parts, meta = [], [], []
            width = max(grid[r][j].coeffs.shape[1] + ewidth[mask ^ (1 << j)] - 1 for j in cols)
            ewidth[mask] = width
            for pos, j in enumerate(cols):
                a, sub = generic[r][j], memo[mask ^ (1 << j)]
                sign = -1 if pos % 2 else 1
                codes.append((a.codes[:, None] + sub.codes[None, :]).reshape(-1))
                parts.append(sign * _conv_products(a.coeffs, sub.coeffs))
                meta.append((j, mask ^ (1 << j), sign))
            allc = np.concatenate(codes)
            result = MPoly(allc, np.vstack([_pad(p, width) for p in parts]))
            memo[mask] = result
            kept = np.isin(allc, result.codes)
            idx = np.flatnonzero(kept)
            order = idx[np.argsort(allc[idx], kind="stable")]
            sc = allc[order]
            starts = np.flatnonzero(np.r_[True, sc[1:] != sc[:-1]]) if len(sc) else np.zeros(0, np.int64)
            out_rows = np.searchsorted(result.codes, sc[starts]) if len(sc) else np.zeros(0, np.int64)
            plan.steps.append(_MinorStep(mask, result.codes, width, meta, order, starts, out_rows))
    return plan
