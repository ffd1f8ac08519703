import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splinelab import (
    Partition1D,
    SplineSpace1D,
    TensorSpline,
    atom_quadrature,
    integrate_against,
    knot_vector,
)

from conftest import random_filtration, symbolic_product_integral


def test_knot_vector_k1():
    kv = knot_vector(Partition1D([0.0, 0.5, 1.0]), 1)
    assert kv.knots.tolist() == [0.0, 0.5, 1.0]
    assert kv.dimension == 2


def test_knot_vector_k2():
    kv = knot_vector(Partition1D([0.0, 0.5, 1.0]), 2)
    assert kv.knots.tolist() == [0.0, 0.0, 0.5, 1.0, 1.0]
    assert kv.dimension == 3


def test_knot_vector_single_atom_k4():
    kv = knot_vector(Partition1D([0.0, 1.0]), 4)
    assert kv.dimension == 4


def test_knot_vector_rejects_bad_order():
    with pytest.raises(ValueError):
        knot_vector(Partition1D([0.0, 1.0]), 0)


def test_eval_basis_hats_at_midpoint():
    space = SplineSpace1D(Partition1D([0.0, 0.5, 1.0]), 2)
    first, vals = space.eval_basis(0.25)
    assert first == 0
    np.testing.assert_allclose(vals, [0.5, 0.5], atol=1e-15)


def test_eval_basis_k1_indicator():
    space = SplineSpace1D(Partition1D([0.0, 0.25, 0.5, 1.0]), 1)
    for x, want in [(0.1, 0), (0.25, 0), (0.3, 1), (0.8, 2)]:
        first, vals = space.eval_basis(x)
        assert first == want
        np.testing.assert_allclose(vals, [1.0])


def test_eval_basis_outside_domain():
    space = SplineSpace1D(Partition1D([0.0, 1.0]), 2)
    with pytest.raises(ValueError):
        space.eval_basis(0.0)
    with pytest.raises(ValueError):
        space.eval_basis(1.5)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_partition_of_unity_and_nonnegativity(k):
    rng = np.random.default_rng(5)
    for seed in range(3):
        F = random_filtration(seed, n_levels=5)
        space = SplineSpace1D(F.axes[0].level(5), k)
        xs = rng.uniform(1e-12, 1.0, 10_000)
        _, vals = space.eval_basis_many(xs)
        assert vals.min() >= -1e-14
        np.testing.assert_allclose(vals.sum(axis=1), 1.0, atol=1e-12)


def test_support_k1_single_atom():
    space = SplineSpace1D(Partition1D([0.0, 0.25, 0.5, 1.0]), 1)
    sup = space.support(1)
    assert (sup.lo, sup.hi) == (0.25, 0.5)


def test_support_interior_hat():
    space = SplineSpace1D(Partition1D(np.linspace(0, 1, 5)), 2)
    sup = space.support(2)
    assert (sup.lo, sup.hi) == (0.25, 0.75)


def test_support_clamped_first_basis_k3():
    # oracle: sweep evaluation marks the atoms where the basis is nonzero
    space = SplineSpace1D(Partition1D(np.linspace(0, 1, 5)), 3)
    coeffs = np.zeros(space.dimension)
    coeffs[0] = 1.0
    nonzero_atoms = []
    for a in range(space.partition.n_atoms):
        lo, hi = space.partition.breakpoints[a], space.partition.breakpoints[a + 1]
        xs = np.linspace(lo + 1e-9, hi, 37)
        first, vals = space.eval_basis_many(xs)
        y = np.zeros(len(xs))
        for r in range(space.order):
            y += vals[:, r] * coeffs[first + r]
        if np.abs(y).max() > 1e-13:
            nonzero_atoms.append(a)
    assert nonzero_atoms == [0]
    sup = space.support(0)
    assert (sup.lo, sup.hi) == (0.0, 0.25)


def test_support_index_out_of_range():
    space = SplineSpace1D(Partition1D([0.0, 1.0]), 2)
    with pytest.raises(IndexError):
        space.support(5)


def test_integrate_constant_sums_to_length():
    space = SplineSpace1D(Partition1D([0.0, 0.3, 0.7, 1.0]), 3)
    b = integrate_against(space, lambda x: np.ones_like(x))
    assert abs(b.sum() - 1.0) <= 1e-14


def test_integrate_identity_k1():
    space = SplineSpace1D(Partition1D([0.0, 0.5, 1.0]), 1)
    b = integrate_against(space, lambda x: x)
    np.testing.assert_allclose(b, [0.125, 0.375], atol=1e-15)


def test_integrate_hat_products_against_symbolic_oracle():
    # uniform h = 1/4 hats: interior int N_i N_{i+1} = h/6, int N_i^2 = 2h/3
    space = SplineSpace1D(Partition1D(np.linspace(0, 1, 5)), 2)
    h = 0.25
    assert abs(symbolic_product_integral(space, 2, 3) - h / 6) <= 1e-15
    assert abs(symbolic_product_integral(space, 2, 2) - 2 * h / 3) <= 1e-15
    coeffs = np.zeros(space.dimension)
    coeffs[2] = 1.0

    def basis2(x):
        first, vals = space.eval_basis_many(x)
        out = np.zeros(np.shape(x))
        for r in range(space.order):
            out += vals[..., r] * coeffs[first + r]
        return out

    b = integrate_against(space, basis2, g=2)
    for j in range(space.dimension):
        assert abs(b[j] - symbolic_product_integral(space, 2, j)) <= 1e-13


@pytest.mark.parametrize("k", [1, 2, 3])
def test_quadrature_matches_symbolic_on_uniform(k):
    space = SplineSpace1D(Partition1D(np.linspace(0, 1, 7)), k)
    rule = atom_quadrature(space.partition, k)
    _, vals = space.eval_basis_many(rule.nodes)
    for i in range(space.dimension):
        for j in range(max(0, i - k + 1), min(space.dimension, i + k)):
            ci = np.zeros(space.dimension)
            ci[i] = 1.0
            fi = np.zeros(rule.nodes.shape)
            first, va = space.eval_basis_many(rule.nodes)
            for r in range(k):
                fi += va[..., r] * ci[first + r]
            cj = np.zeros(space.dimension)
            cj[j] = 1.0
            fj = np.zeros(rule.nodes.shape)
            for r in range(k):
                fj += va[..., r] * cj[first + r]
            quad = float((rule.weights * fi * fj).sum())
            assert abs(quad - symbolic_product_integral(space, i, j)) <= 1e-13


def test_integrate_rejects_bad_g():
    space = SplineSpace1D(Partition1D([0.0, 1.0]), 2)
    with pytest.raises(ValueError):
        integrate_against(space, lambda x: x, g=0)


def test_tensor_constant_coefficients():
    spaces = [
        SplineSpace1D(Partition1D(np.linspace(0, 1, 5)), 2),
        SplineSpace1D(Partition1D(np.linspace(0, 1, 4)), 3),
    ]
    ts = TensorSpline(spaces, np.full((5, 5), 2.5))
    pts = np.random.default_rng(0).uniform(1e-6, 1, (50, 2))
    np.testing.assert_allclose(ts.eval_many(pts), 2.5, atol=1e-13)


def test_tensor_rank_one_separates():
    spaces = [
        SplineSpace1D(Partition1D(np.linspace(0, 1, 5)), 2),
        SplineSpace1D(Partition1D(np.linspace(0, 1, 5)), 2),
    ]
    rng = np.random.default_rng(1)
    u = rng.normal(size=5)
    v = rng.normal(size=5)
    ts = TensorSpline(spaces, np.outer(u, v))
    from splinelab import Spline1D

    su = Spline1D(spaces[0], u)
    sv = Spline1D(spaces[1], v)
    pts = rng.uniform(1e-6, 1, (40, 2))
    np.testing.assert_allclose(
        ts.eval_many(pts)[:, 0], su(pts[:, 0]) * sv(pts[:, 1]), atol=1e-13
    )


def test_tensor_vector_valued_componentwise():
    space = SplineSpace1D(Partition1D(np.linspace(0, 1, 5)), 2)
    coeffs = np.zeros((5, 2))
    coeffs[:, 0] = 3.0
    ts = TensorSpline([space], coeffs, m=2)
    val = ts([0.37])
    np.testing.assert_allclose(val, [3.0, 0.0], atol=1e-14)


def test_tensor_json_round_trip():
    space = SplineSpace1D(Partition1D(np.linspace(0, 1, 4)), 2)
    rng = np.random.default_rng(2)
    ts = TensorSpline([space], rng.normal(size=(4, 2)), m=2)
    doc = ts.to_json_dict()
    back = TensorSpline.from_json_dict(doc)
    pts = rng.uniform(1e-6, 1, (20, 1))
    np.testing.assert_allclose(back.eval_many(pts), ts.eval_many(pts), atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=1e-9, max_value=1.0, exclude_min=False))
def test_partition_of_unity_property(x):
    space = SplineSpace1D(Partition1D([0.0, 0.2, 0.45, 0.8, 1.0]), 4)
    _, vals = space.eval_basis_many(np.array([x]))
    assert abs(vals.sum() - 1.0) <= 1e-12
    assert vals.min() >= -1e-14
