import numpy as np
import pytest

from splinelab import (
    FiltrationSpec,
    HybridMeasure,
    Partition1D,
    SplineSpace1D,
    TensorProjector,
    atom_quadrature,
    build_filtration,
    decay_profile,
    gram,
    operator_norm_inf,
)
from splinelab.experiments import _dense_tensor_norm_2d
from splinelab.projector import GramSystem, operator_norm_1d

from conftest import dense_dual_matrix, random_filtration


def test_gram_k1_diagonal_of_atom_lengths():
    gs = gram(SplineSpace1D(Partition1D([0.0, 0.3, 0.7, 1.0]), 1))
    np.testing.assert_allclose(gs.dense(), np.diag([0.3, 0.4, 0.3]), atol=1e-15)


def test_gram_k2_uniform_interior_row():
    h = 0.25
    gs = gram(SplineSpace1D(Partition1D(np.linspace(0, 1, 5)), 2))
    G = gs.dense()
    np.testing.assert_allclose(G[2, 1:4], [h / 6, 2 * h / 3, h / 6], atol=1e-15)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_gram_row_sums_are_basis_integrals(k):
    from splinelab import integrate_against

    F = random_filtration(1, n_levels=5)
    space = SplineSpace1D(F.axes[0].level(5), k)
    gs = gram(space)
    want = integrate_against(space, lambda x: np.ones_like(x), g=k)
    np.testing.assert_allclose(gs.dense() @ np.ones(space.dimension), want, atol=1e-14)


def test_dual_k1_is_scaled_indicator():
    space = SplineSpace1D(Partition1D([0.0, 0.25, 1.0]), 1)
    gs = gram(space)
    assert gs.dual_eval(0, 0.1) == pytest.approx(4.0)
    assert gs.dual_eval(1, 0.1) == 0.0
    assert gs.dual_eval(1, 0.9) == pytest.approx(1.0 / 0.75)


def test_dual_biorthogonality_by_quadrature():
    # integral of N_i N*_j recomputed through dual point values, not G^-1 G
    for k in (2, 3, 4):
        F = random_filtration(k, n_levels=6)
        space = SplineSpace1D(F.axes[0].level(6), k)
        gs = gram(space)
        rule = atom_quadrature(space.partition, k + 1)
        duals = gs.duals_at(rule.nodes.ravel())          # (dim, P)
        B = space.basis_matrix(rule.nodes.ravel())       # (P, dim)
        M = (B * rule.weights.ravel()[:, None]).T @ duals.T
        err = np.abs(M - np.eye(space.dimension)).max()
        assert err <= 1e-10


def test_dual_matches_dense_inverse_oracle():
    for k in (2, 3):
        space = SplineSpace1D(Partition1D(np.linspace(0, 1, 9)), k)
        gs = gram(space)
        Ginv = dense_dual_matrix(gs)
        xs = np.random.default_rng(0).uniform(1e-9, 1, 31)
        B = space.basis_matrix(xs)
        want = Ginv @ B.T
        got = gs.duals_at(xs)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_dual_eval_bad_index():
    gs = gram(SplineSpace1D(Partition1D([0.0, 1.0]), 2))
    with pytest.raises(IndexError):
        gs.dual_eval(7, 0.5)


def test_degenerate_partition_raises():
    bad = Partition1D([0.0, 1e-320, 1.0])  # far below any sane width floor
    with pytest.raises(ValueError, match="degenerate"):
        gram(SplineSpace1D(bad, 2))


def test_project_reproduces_splines():
    F = random_filtration(2, d=2, n_levels=4)
    tp = TensorProjector.for_level(F, 3, (2, 3))
    rng = np.random.default_rng(7)
    coeffs = rng.normal(size=tuple(tp.dims))
    from splinelab import TensorSpline

    ts = TensorSpline(tp.spaces, coeffs)
    back = tp.project_spline(ts)
    pts = rng.uniform(1e-6, 1, (200, 2))
    np.testing.assert_allclose(back.eval_many(pts), ts.eval_many(pts), atol=1e-10)


def test_project_k1_is_atomwise_average(dyadic_1d):
    tp = TensorProjector.for_level(dyadic_1d, 1, 1)
    ts = tp.project_function(lambda x: x, g=4)
    np.testing.assert_allclose(ts.coeffs.ravel(), [0.25, 0.75], atol=1e-15)


def test_projection_idempotent():
    F = random_filtration(5, n_levels=5)
    tp = TensorProjector.for_level(F, 5, 3)
    f = lambda x: np.sin(3 * x) + x ** 2
    once = tp.project_function(f, g=8)
    twice = tp.project_spline(once)
    pts = np.random.default_rng(1).uniform(1e-6, 1, 300)
    np.testing.assert_allclose(
        twice.eval_many(pts[:, None]), once.eval_many(pts[:, None]), atol=1e-10
    )


def test_projector_self_adjoint():
    F = random_filtration(6, n_levels=4)
    tp = TensorProjector.for_level(F, 4, 2)
    rng = np.random.default_rng(3)
    f = lambda x: np.sin(2 * np.pi * x)
    g_ = lambda x: np.exp(x)
    rule = atom_quadrature(tp.spaces[0].partition, 12)
    xs, w = rule.nodes.ravel(), rule.weights.ravel()
    Pf = tp.project_function(f, g=12).eval_many(xs[:, None])[:, 0]
    Pg = tp.project_function(g_, g=12).eval_many(xs[:, None])[:, 0]
    lhs = float((w * Pf * g_(xs)).sum())
    rhs = float((w * f(xs) * Pg).sum())
    assert abs(lhs - rhs) <= 1e-10


def test_nested_projection_identity():
    # P_n P_m = P_n for n <= m: project a deep-level projection back down
    F = random_filtration(8, n_levels=6)
    f = lambda x: np.cos(2.3 * x) + 0.5 * x
    tp_deep = TensorProjector.for_level(F, 6, 3)
    tp_coarse = TensorProjector.for_level(F, 2, 3)
    pm = tp_deep.project_function(f, g=10)
    pn_pm = tp_coarse.project_spline(pm)
    pn = tp_coarse.project_function(f, g=10, quad_partitions=[F.axes[0].level(6)])
    pts = np.random.default_rng(4).uniform(1e-6, 1, 400)[:, None]
    np.testing.assert_allclose(pn_pm.eval_many(pts), pn.eval_many(pts), atol=1e-9)


def test_kronecker_consistency_small_2d():
    F = build_filtration(FiltrationSpec(d=2, interval=(0.0, 1.0), n_levels=3))
    tp = TensorProjector.for_level(F, 3, (2, 2))
    f = lambda x, y: np.sin(2 * x + 0.3) * np.cos(1.7 * y) + x * y
    ts = tp.project_function(f, g=6)
    # oracle: dense Kronecker Gram solve
    G1 = tp.grams[0].dense()
    G2 = tp.grams[1].dense()
    b = tp.moment_tensor(f, g=6)[..., 0]
    c = np.linalg.solve(np.kron(G1, G2), b.ravel()).reshape(b.shape)
    np.testing.assert_allclose(ts.coeffs[..., 0], c, atol=1e-10)


def test_project_measure_density_matches_function():
    F = random_filtration(9, n_levels=4)
    tp = TensorProjector.for_level(F, 4, 2)
    f = lambda x: 1.0 + 0.5 * np.cos(x)
    theta = HybridMeasure(d=1, density=f, density_quad_points=16)
    a = tp.project_measure(theta)
    b = tp.project_function(f, g=16)
    np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-14)


def test_project_dirac_k1(dyadic_1d):
    tp = TensorProjector.for_level(dyadic_1d, 2, 1)
    theta = HybridMeasure(d=1, diracs=[(np.array([0.3]), np.array([1.0]))])
    ts = tp.project_measure(theta)
    want = np.zeros(4)
    want[1] = 4.0  # 1 / |atom| on the atom containing 0.3
    np.testing.assert_allclose(ts.coeffs.ravel(), want, atol=1e-14)


def test_project_dirac_outside_domain(dyadic_1d):
    tp = TensorProjector.for_level(dyadic_1d, 2, 1)
    theta = HybridMeasure(d=1, diracs=[(np.array([1.3]), np.array([1.0]))])
    with pytest.raises(ValueError):
        tp.project_measure(theta)


def test_project_dirac_decay_matches_dense_oracle():
    F = build_filtration(FiltrationSpec(d=1, interval=(0.0, 1.0), n_levels=5))
    tp = TensorProjector.for_level(F, 5, 2)
    x0 = 0.3017
    theta = HybridMeasure(d=1, diracs=[(np.array([x0]), np.array([1.0]))])
    ts = tp.project_measure(theta)
    space = tp.spaces[0]
    Ginv = dense_dual_matrix(tp.grams[0])
    first, vals = space.eval_basis(x0)
    nvec = np.zeros(space.dimension)
    nvec[first : first + 2] = vals
    want = Ginv @ nvec
    np.testing.assert_allclose(ts.coeffs.ravel(), want, atol=1e-12)
    ys = np.random.default_rng(0).uniform(1e-9, 1, 64)
    got = ts.eval_many(ys[:, None])[:, 0]
    ref = space.basis_matrix(ys) @ want
    np.testing.assert_allclose(got, ref, atol=1e-12)


def test_operator_norm_k1_exactly_one():
    for seed in range(3):
        F = random_filtration(seed, n_levels=6)
        tp = TensorProjector.for_level(F, 6, 1)
        est = operator_norm_inf(tp)
        assert abs(est.value - 1.0) <= 1e-12


def test_operator_norm_tensor_is_product():
    F = build_filtration(FiltrationSpec(d=2, interval=(0.0, 1.0), n_levels=3))
    tp = TensorProjector.for_level(F, 3, (2, 3))
    est = operator_norm_inf(tp, nx_per_atom=6, ny_per_atom=6)
    assert est.value == pytest.approx(est.per_axis[0] * est.per_axis[1], rel=1e-14)
    direct = _dense_tensor_norm_2d(tp, nx=6, ny=6)
    assert abs(est.value - direct) <= 1e-9


def test_operator_norm_window_truncation_consistent():
    F = build_filtration(FiltrationSpec(d=1, interval=(0.0, 1.0), n_levels=6))
    space = SplineSpace1D(F.axes[0].level(6), 2)
    gs = GramSystem(space)
    full = operator_norm_1d(gs, window=10_000)
    windowed = operator_norm_1d(gs, window=48)
    assert abs(full - windowed) <= 1e-12


def test_decay_profile_k1_is_degenerate():
    F = random_filtration(0, n_levels=4)
    gs = GramSystem(SplineSpace1D(F.axes[0].level(4), 1))
    prof = decay_profile(gs)
    assert prof.q_hat == 0.0
    assert np.all(prof.values[1:] == 0.0)


def test_decay_profile_k2_uniform_ratio():
    # tridiagonal inverse decay ratio for uniform hats is 2 - sqrt(3)
    space = SplineSpace1D(Partition1D(np.linspace(0, 1, 33)), 2)
    prof = decay_profile(GramSystem(space))
    assert prof.q_hat < 1.0
    assert abs(prof.q_hat - (2 - np.sqrt(3))) < 0.05
    assert prof.values[0] > 0


def test_decay_profile_envelope_dominates():
    for seed in range(5):
        F = random_filtration(seed, n_levels=6)
        for k in (2, 3, 4):
            space = SplineSpace1D(F.axes[0].level(6), k)
            prof = decay_profile(GramSystem(space))
            assert prof.q_hat < 0.99
            good = prof.values > prof.floor
            assert np.all(
                prof.values[good] <= prof.envelope(prof.distances[good]) * (1 + 1e-12)
            )


def test_decay_profile_monotone_beyond_k():
    # checked against the dense-inverse oracle on seeded random partitions
    for seed in range(20):
        F = random_filtration(seed, n_levels=6)
        for k in (2, 3):
            space = SplineSpace1D(F.axes[0].level(6), k)
            prof = decay_profile(GramSystem(space))
            vals = prof.values
            for s in range(k, len(vals) - 1):
                if vals[s + 1] > prof.floor:
                    assert vals[s + 1] <= vals[s] * (1 + 1e-9)


def test_decay_profile_needs_room():
    space = SplineSpace1D(Partition1D([0.0, 1.0]), 3)
    with pytest.raises(ValueError):
        decay_profile(GramSystem(space))


def test_decay_q_hat_below_one_fifty_seeds():
    # 50 seeded random nested partitions, every order up to 4
    for seed in range(50):
        F = random_filtration(100 + seed, n_levels=6)
        for k in (1, 2, 3, 4):
            space = SplineSpace1D(F.axes[0].level(6), k)
            prof = decay_profile(GramSystem(space))
            assert prof.q_hat < 1.0
