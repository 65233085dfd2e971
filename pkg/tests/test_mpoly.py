import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from respose.mpoly import (
    NVARS,
    MPoly,
    compile_laplace_plan,
    decode,
    det_memoized_laplace,
    divided_difference,
    encode,
    eval_poly,
    grlex_key,
    substitute_y,
)


def random_poly(rng, n_terms=6, max_exp=2, hidden=3, vars_=range(NVARS)) -> MPoly:
    terms = {}
    for _ in range(n_terms):
        e = [0] * NVARS
        for v in vars_:
            e[v] = int(rng.integers(0, max_exp + 1))
        terms[tuple(e)] = rng.normal(size=hidden)
    return MPoly.from_terms(terms)


def naive_eval(f: MPoly, x, z):
    total = 0.0
    for exps, row in f.terms().items():
        mono = 1.0
        for xi, e in zip(x, exps):
            mono *= xi**e
        total += mono * sum(c * z**k for k, c in enumerate(row))
    return total


def point(rng):
    return rng.uniform(-1.5, 1.5, NVARS), rng.uniform(-1.5, 1.5)


def rel_close(a, b, tol, scale=1.0):
    return abs(a - b) <= tol * max(abs(a), abs(b), scale)


seeds = st.integers(0, 2**32 - 1)


def test_encode_decode_round_trip():
    e = tuple(range(NVARS))
    assert decode(encode(e)) == e
    with pytest.raises(ValueError):
        encode([40] + [0] * (NVARS - 1))


def test_zero_and_single_term():
    assert eval_poly(MPoly.zero(), np.ones(NVARS), 1.0) == 0
    e = [0] * NVARS
    e[0], e[7] = 1, 1
    f = MPoly.from_terms({tuple(e): [0, 0, 3.0]})
    x = np.zeros(NVARS)
    x[0], x[7] = 2.0, 5.0
    assert eval_poly(f, x, 1.0) == pytest.approx(30.0)


@given(seeds)
def test_evaluation_matches_naive(seed):
    rng = np.random.default_rng(seed)
    f = random_poly(rng)
    x, z = point(rng)
    assert rel_close(f(x, z), naive_eval(f, x, z), 1e-13)


@given(seeds)
def test_ring_axioms_under_evaluation(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_poly(rng) for _ in range(3))
    x, z = point(rng)
    va, vb, vc = a(x, z), b(x, z), c(x, z)
    s = max(abs(va), abs(vb), abs(vc), 1.0)
    assert rel_close((a + b)(x, z), va + vb, 1e-12, s)
    assert rel_close((a * b)(x, z), va * vb, 1e-12, s * s)
    assert rel_close(((a + b) * c)(x, z), (va + vb) * vc, 1e-12, s * s)
    assert rel_close((a * (b * c))(x, z), ((a * b) * c)(x, z), 1e-12, s**3)


def test_additive_and_multiplicative_identities(rng):
    a = random_poly(rng)
    assert (a - a).is_zero
    same = a + MPoly.zero()
    assert np.array_equal(same.codes, a.codes) and np.allclose(same.coeffs, a.coeffs)
    one = a * MPoly.constant([1.0])
    assert np.array_equal(one.codes, a.codes) and np.allclose(one.coeffs, a.coeffs)


def test_difference_of_squares():
    x1, y1 = MPoly.variable(0), MPoly.variable(6)
    f = (x1 - y1) * (x1 + y1)
    assert f.terms().keys() == (x1 * x1 - y1 * y1).terms().keys()
    assert len(f) == 2


def test_hidden_coefficients_convolve():
    f = MPoly.constant([1.0, 1.0]) * MPoly.constant([1.0, -1.0])
    np.testing.assert_allclose(f.coefficient([0] * NVARS), [1.0, 0.0, -1.0])


def test_divided_difference_examples():
    x1 = MPoly.variable(0)
    dd = divided_difference(x1 * x1, 0)
    assert set(dd.terms()) == {tuple(int(i == 0) for i in range(NVARS)), tuple(int(i == 6) for i in range(NVARS))}
    assert divided_difference(MPoly.constant([2.0]) * MPoly.variable(1), 0).is_zero


def test_divided_difference_rejects_existing_duplicate():
    with pytest.raises(ValueError):
        divided_difference(MPoly.variable(6), 0)


@given(seeds, st.integers(0, 5))
def test_divided_difference_matches_quotient(seed, i):
    rng = np.random.default_rng(seed)
    f = random_poly(rng, max_exp=3, vars_=range(6))
    x, z = point(rng)
    x[i + 6] = x[i] + rng.uniform(0.2, 1.0)
    swapped = x.copy()
    swapped[i] = x[i + 6]
    expected = (f(x, z) - f(swapped, z)) / (x[i] - x[i + 6])
    assert rel_close(divided_difference(f, i)(x, z), expected, 1e-12, 1.0)


@given(seeds, st.integers(0, 5))
def test_divided_difference_reconstructs(seed, i):
    rng = np.random.default_rng(seed)
    f = random_poly(rng, max_exp=3, vars_=range(6))
    rebuilt = divided_difference(f, i) * (MPoly.variable(i) - MPoly.variable(i + 6)) + substitute_y(f, i)
    diff = rebuilt - f
    assert diff.is_zero or diff.max_abs() < 1e-13 * f.max_abs()


def grid_values(grid, x, z):
    return np.array([[g(x, z) for g in row] for row in grid])


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_det_matches_scalar_determinant(n):
    rng = np.random.default_rng(n)
    grid = [[random_poly(rng, n_terms=3, max_exp=1) for _ in range(n)] for _ in range(n)]
    det = det_memoized_laplace(grid)
    for _ in range(5):
        x, z = point(rng)
        ref = np.linalg.det(grid_values(grid, x, z))
        assert rel_close(det(x, z), ref, 1e-10, 1.0)


def test_det_of_constants_is_scalar_det(rng):
    A = rng.normal(size=(4, 4))
    grid = [[MPoly.constant([v]) for v in row] for row in A]
    det = det_memoized_laplace(grid)
    assert det.coefficient([0] * NVARS)[0] == pytest.approx(np.linalg.det(A), rel=1e-12)


def test_det_identity_and_repeated_rows(rng):
    one, zero = MPoly.constant([1.0]), MPoly.zero()
    ident = [[one if i == j else zero for j in range(5)] for i in range(5)]
    np.testing.assert_allclose(det_memoized_laplace(ident).coefficient([0] * NVARS), [1.0])
    row = [random_poly(rng, n_terms=3) for _ in range(3)]
    grid = [row, [random_poly(rng, n_terms=3) for _ in range(3)], row]
    det = det_memoized_laplace(grid)
    reference = max(g.max_abs() for g in row) ** 2
    assert det.is_zero or det.max_abs() < 1e-12 * reference


def test_det_antisymmetric_under_row_swap(rng):
    grid = [[random_poly(rng, n_terms=2, max_exp=1) for _ in range(4)] for _ in range(4)]
    a = det_memoized_laplace(grid)
    b = det_memoized_laplace([grid[1], grid[0], *grid[2:]])
    diff = a + b
    assert diff.is_zero or diff.max_abs() < 1e-12 * a.max_abs()


def test_det_rejects_bad_grids():
    with pytest.raises(ValueError):
        det_memoized_laplace([])
    with pytest.raises(ValueError):
        det_memoized_laplace([[MPoly.zero()] * 8 for _ in range(8)])


def test_compiled_plan_matches_direct_expansion(rng):
    grid = [[random_poly(rng, n_terms=3, max_exp=1) for _ in range(4)] for _ in range(4)]
    plan = compile_laplace_plan(grid)
    fresh = [[MPoly(g.codes, rng.normal(size=g.coeffs.shape), canonical=True) for g in row] for row in grid]
    direct = det_memoized_laplace(fresh)
    replay = plan.evaluate(fresh)
    assert np.array_equal(direct.codes, replay.codes)
    np.testing.assert_allclose(replay.coeffs, direct.coeffs, atol=1e-12 * direct.max_abs())


def test_plan_rejects_other_pattern(rng):
    grid = [[random_poly(rng, n_terms=2) for _ in range(3)] for _ in range(3)]
    plan = compile_laplace_plan(grid)
    other = [[random_poly(rng, n_terms=4) for _ in range(3)] for _ in range(3)]
    with pytest.raises(ValueError):
        plan.evaluate(other)


def test_grlex_terms_sorted():
    mons = list(itertools.product(range(2), repeat=3))
    keyed = sorted(mons, key=lambda m: grlex_key(list(m) + [0] * (NVARS - 3)))
    assert keyed[0] == (0, 0, 0) and keyed[1] == (1, 0, 0) and keyed[-1] == (1, 1, 1)
