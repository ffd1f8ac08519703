"""Clamped B-spline spaces over one partition, tensor products, and quadrature.

The order-k space over a partition consists of the piecewise polynomials of
order k (degree k-1) on its atoms with k-2 continuous derivatives globally.
Clamped knot vectors (boundary breakpoints repeated k times, interior simple)
realize exactly that space; for k=1 the basis degenerates to the atom
indicators.  Breakpoint evaluation follows the half-open atom convention, so
for k=1 a breakpoint value is taken from the atom whose right endpoint it is;
for k >= 2 the spline is continuous and the convention is invisible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filtration import Interval, Partition1D

DEFAULT_QUAD_POINTS = 4      # per-atom Gauss-Legendre points for spline integrands
GENERAL_QUAD_POINTS = 16     # fixed rule for integrands that are not splines


@dataclass(frozen=True)
class KnotVector:
    knots: np.ndarray
    order: int

    @property
    def dimension(self) -> int:
        return len(self.knots) - self.order


def knot_vector(p: Partition1D, k: int) -> KnotVector:
    """Clamped knot vector of order k over the partition p."""
    if k < 1:
        raise ValueError(f"order must be >= 1, got {k}")
    bp = p.breakpoints
    knots = np.concatenate([np.full(k - 1, bp[0]), bp, np.full(k - 1, bp[-1])])
    knots.flags.writeable = False
    return KnotVector(knots=knots, order=k)


class SplineSpace1D:
    """Order-k spline space over one partition, with the clamped B-spline basis."""

    def __init__(self, partition: Partition1D, order: int):
        self.partition = partition
        self.order = int(order)
        self.knot_vector = knot_vector(partition, self.order)

    @property
    def dimension(self) -> int:
        return self.partition.n_atoms + self.order - 1

    @property
    def interval(self) -> Interval:
        return self.partition.interval

    def eval_basis_many(self, xs):
        """Values of the (at most k) nonzero basis functions at each point.

        Parameters:
            xs : array of points in (a, b]

        Returns:
            first : (n,) int array, index of the first active basis function
            values : (n, k) array, values of basis functions first..first+k-1;
                nonnegative and summing to 1 at every point
        """
        k = self.order
        T = self.knot_vector.knots
        dim = self.dimension
        xs = np.asarray(xs, dtype=float)
        iv = self.interval
        if np.any(xs <= iv.lo) or np.any(xs > iv.hi):
            raise ValueError(f"evaluation point outside ({iv.lo}, {iv.hi}]")
        flat = np.atleast_1d(xs).ravel()
        # knot span mu with T[mu] < x <= T[mu+1]; the (.,.] convention is built in here
        mu = np.searchsorted(T, flat, side="left") - 1
        mu = np.clip(mu, k - 1, dim - 1)
        n = flat.size
        N = np.zeros((n, k))
        N[:, 0] = 1.0
        for j in range(1, k):
            saved = np.zeros(n)
            for r in range(j):
                left = flat - T[mu + 1 - j + r]
                right = T[mu + 1 + r] - flat
                denom = right + left
                mask = denom > 0
                temp = np.where(mask, N[:, r] / np.where(mask, denom, 1.0), 0.0)
                N[:, r] = saved + right * temp
                saved = left * temp
            N[:, j] = saved
        first = mu - (k - 1)
        return first.reshape(np.shape(xs)), N.reshape(np.shape(xs) + (k,))

    def eval_basis(self, x: float):
        """(first_index, k values) of the nonzero basis functions at one point."""
        first, vals = self.eval_basis_many(np.array([x]))
        return int(first[0]), vals[0]

    def basis_matrix(self, xs) -> np.ndarray:
        """Dense collocation matrix B with B[p, i] = N_i(xs[p])."""
        xs = np.asarray(xs, dtype=float).ravel()
        first, vals = self.eval_basis_many(xs)
        B = np.zeros((len(xs), self.dimension))
        rows = np.arange(len(xs))
        for r in range(self.order):
            # += because k=1 clipping could in principle revisit a column
            B[rows, first + r] += vals[:, r]
        return B

    def support_atom_range(self, i: int):
        """Inclusive atom index range (lo, hi) where basis i is nonzero."""
        if not 0 <= i < self.dimension:
            raise IndexError(f"basis index {i} out of range [0, {self.dimension})")
        k = self.order
        lo = max(i - (k - 1), 0)
        hi = min(i, self.partition.n_atoms - 1)
        return lo, hi

    def support(self, i: int) -> Interval:
        """Union of the atoms where basis i is nonzero; spans at most k atoms."""
        lo, hi = self.support_atom_range(i)
        bp = self.partition.breakpoints
        return Interval(bp[lo], bp[hi + 1])


@dataclass(frozen=True)
class QuadratureRule:
    """Per-atom Gauss-Legendre nodes and weights, exact for degree <= 2g-1."""

    nodes: np.ndarray    # (n_atoms, g)
    weights: np.ndarray  # (n_atoms, g)

    @property
    def points_per_atom(self) -> int:
        return self.nodes.shape[1]


def atom_quadrature(p: Partition1D, g: int) -> QuadratureRule:
    if g < 1:
        raise ValueError(f"need at least one quadrature point, got {g}")
    ref_nodes, ref_weights = np.polynomial.legendre.leggauss(g)
    lo = p.breakpoints[:-1][:, None]
    hi = p.breakpoints[1:][:, None]
    nodes = 0.5 * (hi - lo) * ref_nodes + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * np.broadcast_to(ref_weights, nodes.shape)
    return QuadratureRule(nodes=nodes, weights=weights)


def integrate_against(space: SplineSpace1D, f, g: int = None) -> np.ndarray:
    """Vector b with b_i = int f(x) N_i(x) dx, by per-atom Gauss-Legendre.

    Exact (to roundoff) whenever f is a piecewise polynomial of degree
    <= 2g-1-(k-1) on the atoms of the space's partition.
    """
    k = space.order
    if g is None:
        g = max(k, DEFAULT_QUAD_POINTS)
    rule = atom_quadrature(space.partition, g)
    fx = np.asarray(f(rule.nodes), dtype=float)
    if fx.shape != rule.nodes.shape:
        raise ValueError("integrand must evaluate elementwise on node arrays")
    _, vals = space.eval_basis_many(rule.nodes)  # (n_atoms, g, k)
    contrib = np.einsum("ag,ag,agr->ar", rule.weights, fx, vals)
    b = np.zeros(space.dimension)
    atoms = np.arange(space.partition.n_atoms)
    for r in range(k):
        np.add.at(b, atoms + r, contrib[:, r])
    return b


@dataclass
class Spline1D:
    space: SplineSpace1D
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.dimension,):
            raise ValueError(
                f"coefficient length {self.coeffs.shape} != dimension {self.space.dimension}"
            )

    def __call__(self, xs):
        xs = np.asarray(xs, dtype=float)
        first, vals = self.space.eval_basis_many(xs)
        out = np.zeros(np.shape(xs))
        for r in range(self.space.order):
            out += vals[..., r] * self.coeffs[first + r]
        return out


class TensorSpline:
    """Tensor-product spline with values in R^m.

    Coefficients are stored as a tensor of shape (dim_1, ..., dim_d, m); the
    value at x is sum_i coeffs[i] * prod_l N_{i_l}(x_l).
    """

    def __init__(self, spaces, coeffs, m: int = None):
        self.spaces = tuple(spaces)
        coeffs = np.asarray(coeffs, dtype=float)
        dims = tuple(s.dimension for s in self.spaces)
        if coeffs.shape == dims:
            coeffs = coeffs[..., None]
        if coeffs.ndim != len(dims) + 1 or coeffs.shape[: len(dims)] != dims:
            raise ValueError(f"coefficient shape {coeffs.shape} incompatible with {dims}")
        if m is not None and coeffs.shape[-1] != m:
            raise ValueError(f"value dimension mismatch: {coeffs.shape[-1]} != {m}")
        self.coeffs = coeffs

    @property
    def d(self) -> int:
        return len(self.spaces)

    @property
    def m(self) -> int:
        return self.coeffs.shape[-1]

    def eval_many(self, points) -> np.ndarray:
        """Evaluate at points given as an (n, d) array; returns (n, m)."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None] if self.d == 1 else pts[None, :]
        if pts.shape[1] != self.d:
            raise ValueError(f"points have dimension {pts.shape[1]}, expected {self.d}")
        n = pts.shape[0]
        firsts, vals = [], []
        for ell, space in enumerate(self.spaces):
            f, v = space.eval_basis_many(pts[:, ell])
            firsts.append(f)
            vals.append(v)
        out = np.zeros((n, self.m))
        # accumulate over the active window, at most prod_l k_l terms per point
        for multi in np.ndindex(*(s.order for s in self.spaces)):
            idx = tuple(firsts[ell] + multi[ell] for ell in range(self.d))
            w = np.ones(n)
            for ell in range(self.d):
                w = w * vals[ell][:, multi[ell]]
            out += w[:, None] * self.coeffs[idx]
        return out

    def __call__(self, point) -> np.ndarray:
        """Value at a single point of I^d, as an (m,) array."""
        return self.eval_many(np.atleast_1d(np.asarray(point, float))[None, :])[0]

    def to_json_dict(self) -> dict:
        return {
            "orders": [s.order for s in self.spaces],
            "breakpoints": [s.partition.breakpoints.tolist() for s in self.spaces],
            "m": self.m,
            "coeffs": self.coeffs.tolist(),
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "TensorSpline":
        spaces = [
            SplineSpace1D(Partition1D(bp), k)
            for bp, k in zip(doc["breakpoints"], doc["orders"])
        ]
        return TensorSpline(spaces, np.asarray(doc["coeffs"]), m=doc["m"])


def eval_tensor_spline(ts: TensorSpline, x) -> np.ndarray:
    """Value of a tensor spline at one point (thin wrapper over TensorSpline)."""
    return ts(x)


def as_value_array(out, base_shape, where: str = "function") -> np.ndarray:
    """Normalize a callable's output to shape base_shape + (m,)."""
    out = np.asarray(out, dtype=float)
    if out.shape == tuple(base_shape):
        return out[..., None]
    if out.ndim == len(base_shape) + 1 and out.shape[: len(base_shape)] == tuple(base_shape):
        return out
    raise ValueError(
        f"{where} returned shape {out.shape}, expected {tuple(base_shape)} or {tuple(base_shape)} + (m,)"
    )
