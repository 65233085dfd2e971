import itertools
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from respose.bkk import (
    EXPECTED_BOUNDS,
    NewtonPolytope,
    bezout_bound,
    dq_system_polytopes,
    gauge_polynomial_dq,
    lattice_volume,
    minkowski_sum,
    mixed_volume,
    mixed_volume_inclusion_exclusion,
    newton_polytope,
    pose_polynomial_dq,
    random_lattice_polytope,
    rt_system_polytopes,
    verify_bounds,
)


def simplex(dim, scale=1):
    return NewtonPolytope.from_points([tuple(0 for _ in range(dim))] + [tuple(scale * int(i == j) for j in range(dim)) for i in range(dim)])


def cube(dim, side=1):
    return NewtonPolytope.from_points(itertools.product(range(0, side + 1, side), repeat=dim))


@pytest.fixture(scope="module")
def reports():
    return {r.name: r for r in verify_bounds()}


def test_verify_bounds_values(reports):
    assert {k: r.value for k, r in reports.items()} == EXPECTED_BOUNDS
    assert all(r.ok for r in reports.values())


def test_bezout_examples():
    assert bezout_bound([3] * 6) == 729
    assert bezout_bound([2] * 7) == 128
    assert bezout_bound([1] * 5) == 1


def test_gauge_support():
    g, xs = gauge_polynomial_dq()
    P = newton_polytope(g, xs)
    # d1 + d2 q2 + d3 q3 + d4 q4 over (d1, d2, d3, d4, q2, q3, q4)
    assert P.support == frozenset(
        {(1, 0, 0, 0, 0, 0, 0), (0, 1, 0, 0, 1, 0, 0), (0, 0, 1, 0, 0, 1, 0), (0, 0, 0, 1, 0, 0, 1)}
    )


def test_constant_support():
    x, y = sympy.symbols("x y")
    assert newton_polytope(sympy.Integer(5), (x, y)).support == frozenset({(0, 0)})


def test_symbolic_coefficients_kept_until_they_cancel():
    x, a = sympy.symbols("x a")
    assert newton_polytope(a * x**2 + x - a * x**2, (x,)).support == frozenset({(1,)})


def test_constraint_supports_are_shared():
    polys = dq_system_polytopes()
    assert len({p.support for p in polys[:6]}) == 1
    f, xs = pose_polynomial_dq(0)
    assert len(polys[0]) == len(sympy.Poly(sympy.expand(f), *xs).monoms())
    assert len({p.support for p in rt_system_polytopes()}) == 1


def test_four_two_supports_differ_only_for_origin_matches():
    polys = dq_system_polytopes(n_without_b=4)
    assert polys[0].support == polys[3].support
    assert polys[0].support < polys[4].support


def test_lattice_volumes():
    assert lattice_volume(cube(3).array()) == 1
    assert lattice_volume(simplex(3).array()) == Fraction(1, 6)
    assert lattice_volume(np.array([[0, 0], [1, 1], [2, 2]])) == 0


def test_minkowski_sum_of_simplices():
    s = simplex(2).array()
    total = minkowski_sum(s, s)
    assert lattice_volume(total) == lattice_volume(simplex(2, 2).array())


@pytest.mark.parametrize("dim", [1, 2, 3, 4, 5])
def test_unit_simplices_give_one(dim):
    assert mixed_volume([simplex(dim)] * dim) == 1


def test_mixed_volume_of_scaled_simplices_is_bezout():
    assert mixed_volume([simplex(3, 2), simplex(3, 3), simplex(3, 1)]) == 6
    assert mixed_volume([simplex(3, 2)] * 2 + [simplex(3, 3)]) == 12


def test_single_body_is_factorial_volume():
    assert mixed_volume([cube(3, 2)] * 3) == 6 * 8


def test_dimension_checks():
    with pytest.raises(ValueError):
        mixed_volume([simplex(2)] * 3)
    with pytest.raises(ValueError):
        mixed_volume([simplex(8)] * 8)
    with pytest.raises(ValueError):
        NewtonPolytope.from_points([])


seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(2, 3))
def test_symmetry(seed, dim):
    rng = np.random.default_rng(seed)
    polys = [random_lattice_polytope(rng, dim) for _ in range(dim)]
    base = mixed_volume_inclusion_exclusion(polys)
    for perm in itertools.permutations(polys):
        assert mixed_volume_inclusion_exclusion(list(perm)) == base


@given(seeds, st.integers(2, 4))
def test_volume_polynomial_matches_inclusion_exclusion(seed, dim):
    rng = np.random.default_rng(seed)
    P = random_lattice_polytope(rng, dim)
    Q = random_lattice_polytope(rng, dim)
    s = int(rng.integers(1, dim))
    polys = [P] * s + [Q] * (dim - s)
    assert mixed_volume(polys) == mixed_volume_inclusion_exclusion(polys)


@given(seeds)
def test_grouped_route_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    polys = [random_lattice_polytope(rng, 3) for _ in range(3)]
    assert mixed_volume(polys) == mixed_volume_inclusion_exclusion(polys)


@given(seeds, st.integers(2, 3))
def test_monotone_under_inclusion(seed, dim):
    rng = np.random.default_rng(seed)
    polys = [random_lattice_polytope(rng, dim) for _ in range(dim)]
    extra = rng.integers(0, 4, size=(2, dim))
    bigger = NewtonPolytope.from_points(list(polys[0].support) + [tuple(int(v) for v in e) for e in extra])
    assert mixed_volume_inclusion_exclusion([bigger, *polys[1:]]) >= mixed_volume_inclusion_exclusion(polys)
