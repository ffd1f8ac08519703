import numpy as np
import pytest

from splinelab import FiltrationSpec, build_filtration


@pytest.fixture
def dyadic_1d():
    return build_filtration(FiltrationSpec(d=1, interval=(0.0, 1.0), n_levels=5))


@pytest.fixture
def dyadic_2d():
    return build_filtration(FiltrationSpec(d=2, interval=(0.0, 1.0), n_levels=4))


def random_filtration(seed, d=1, n_levels=6, p_split=0.7, jitter=(0.35, 0.65)):
    spec = FiltrationSpec(
        d=d,
        interval=(0.0, 1.0),
        n_levels=n_levels,
        rules=[{"name": "random-atom-bisect", "p_split": p_split,
                "split_range": list(jitter), "base_atoms": 2}] * d,
        seed=seed,
    )
    return build_filtration(spec)


# ---------------------------------------------------------------------------
# independent oracles


def piecewise_poly(space, coeffs, atom):
    """Exact polynomial of one spline on one atom via Chebyshev interpolation.

    Interpolating a degree k-1 polynomial at k nodes reproduces it exactly,
    so the returned Polynomial is the spline's restriction to the atom with
    no quadrature involved.
    """
    k = space.order
    lo, hi = space.partition.breakpoints[atom], space.partition.breakpoints[atom + 1]
    nodes = lo + (hi - lo) * (np.cos((2 * np.arange(k) + 1) * np.pi / (2 * k)) + 1) / 2
    first, vals = space.eval_basis_many(nodes)
    ys = np.zeros(len(nodes))
    for r in range(k):
        ys += vals[:, r] * np.asarray(coeffs)[first + r]
    return np.polynomial.Polynomial.fit(nodes, ys, deg=k - 1).convert()


def symbolic_product_integral(space, i, j):
    """int N_i N_j by exact piecewise polynomial interpolation (no quadrature).

    On each atom the product is a polynomial of degree 2k-2, so interpolating
    it at 2k-1 Chebyshev points reproduces it exactly; the antiderivative of
    the interpolant gives the integral without any quadrature rule.
    """
    bp = space.partition.breakpoints
    k = space.order
    dim = space.dimension

    def basis_values(idx, xs):
        first, vals = space.eval_basis_many(xs)
        out = np.zeros(len(xs))
        for r in range(k):
            out += vals[:, r] * (first + r == idx)
        return out

    total = 0.0
    for a in range(space.partition.n_atoms):
        lo, hi = bp[a], bp[a + 1]
        npts = 2 * k - 1
        nodes = lo + (hi - lo) * (np.cos((2 * np.arange(npts) + 1) * np.pi / (2 * npts)) + 1) / 2
        ys = basis_values(i, nodes) * basis_values(j, nodes)
        p = np.polynomial.Polynomial.fit(nodes, ys, deg=npts - 1)
        anti = p.integ()
        total += anti(hi) - anti(lo)
    return total


def dense_dual_matrix(gs):
    """Dense inverse-Gram oracle: row i holds the coefficients of N*_i."""
    return np.linalg.inv(gs.dense())
