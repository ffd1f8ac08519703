"""Gram systems, dual B-splines, orthoprojectors, and the dual decay profile.

The L2 orthoprojector onto a spline space is P f = sum_i <f, N_i> N*_i with
(N*_i) the biorthogonal system; in coefficients that is one banded SPD solve
G c = b per axis.  Dual functions are never materialized: a single banded
solve of G y = N(x) yields the values N*_i(x) for every i at once.

Tensor-product spaces have Gram matrix G_1 x ... x G_d (never assembled);
projection applies per-axis banded solves along each tensor mode, and the
L1->L1 operator norm (the Linf norm of the symmetric kernel) factorizes as
the product of the per-axis norms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky_banded, cho_solve_banded

from .bspline import (
    DEFAULT_QUAD_POINTS,
    SplineSpace1D,
    TensorSpline,
    as_value_array,
    atom_quadrature,
)
from .filtration import Partition1D, TensorFiltration

PROFILE_FLOOR = 1e-14        # decay-profile entries below this are roundoff noise
NORM_SAMPLES_PER_ATOM = 8    # Chebyshev points per atom for kernel-norm estimation
NORM_WINDOW_ATOMS = 64       # kernel truncation radius, in atoms (q^64 is far below roundoff)


class GramSystem:
    """Banded Cholesky-factorized Gram matrix of one spline space."""

    def __init__(self, space: SplineSpace1D):
        self.space = space
        self.band = _assemble_gram_band(space)
        try:
            self._chol = cholesky_banded(self.band, lower=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            # non-positive pivot or inf/nan entries: an atom fell below the width floor
            raise ValueError(
                "Gram factorization failed; the partition has a degenerate atom"
            ) from exc

    @property
    def dimension(self) -> int:
        return self.space.dimension

    @property
    def bandwidth(self) -> int:
        return self.space.order - 1

    def dense(self) -> np.ndarray:
        """Dense Gram matrix (small spaces / oracles only)."""
        k, dim = self.space.order, self.dimension
        G = np.zeros((dim, dim))
        for off in range(k):
            row = self.band[k - 1 - off]
            idx = np.arange(off, dim)
            G[idx - off, idx] = row[off:]
            G[idx, idx - off] = row[off:]
        return G

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve G y = rhs; rhs may carry extra trailing axes."""
        rhs = np.asarray(rhs, dtype=float)
        flat = rhs.reshape(rhs.shape[0], -1)
        out = cho_solve_banded((self._chol, False), flat)
        return out.reshape(rhs.shape)

    def duals_at(self, xs) -> np.ndarray:
        """Matrix D with D[i, p] = N*_i(xs[p]), via one banded solve."""
        B = self.space.basis_matrix(xs)
        return self.solve(B.T)

    def dual_eval(self, i: int, x: float) -> float:
        """N*_i(x) = sum_j (G^-1)_{ij} N_j(x)."""
        if not 0 <= i < self.dimension:
            raise IndexError(f"dual index {i} out of range [0, {self.dimension})")
        return float(self.duals_at(np.array([x]))[i, 0])


def _assemble_gram_band(space: SplineSpace1D) -> np.ndarray:
    """Upper banded storage of G_{ij} = int N_i N_j; g = k Gauss points are exact."""
    k = space.order
    p = space.partition
    rule = atom_quadrature(p, k)
    with np.errstate(over="ignore", invalid="ignore"):
        # subnormal atom widths overflow the recursion; the factorization's
        # finite check turns that into the degenerate-partition error
        _, vals = space.eval_basis_many(rule.nodes)      # (n_atoms, g, k)
    wv = vals * rule.weights[:, :, None]
    blocks = np.einsum("agr,agc->arc", vals, wv)         # per-atom k x k Gram blocks
    dim = space.dimension
    ab = np.zeros((k, dim))
    atoms = np.arange(p.n_atoms)
    for r in range(k):
        for c in range(r, k):
            np.add.at(ab[k - 1 + r - c], atoms + c, blocks[:, r, c])
    return ab


def gram(space: SplineSpace1D) -> GramSystem:
    return GramSystem(space)


# ---------------------------------------------------------------------------
# tensor projector


class TensorProjector:
    """Orthoprojector onto a tensor-product spline space, in Kronecker form."""

    def __init__(self, spaces):
        self.spaces = tuple(spaces)
        self.grams = tuple(GramSystem(s) for s in self.spaces)
        self.orders = tuple(s.order for s in self.spaces)

    @property
    def d(self) -> int:
        return len(self.spaces)

    @property
    def dims(self) -> tuple:
        return tuple(s.dimension for s in self.spaces)

    @staticmethod
    def for_level(F: TensorFiltration, n: int, orders) -> "TensorProjector":
        if isinstance(orders, int):
            orders = (orders,) * F.d
        if len(orders) != F.d:
            raise ValueError(f"need one order per axis, got {orders} for d={F.d}")
        spaces = [SplineSpace1D(F.axes[ell].level(n), orders[ell]) for ell in range(F.d)]
        return TensorProjector(spaces)

    def solve_coefficients(self, b: np.ndarray) -> np.ndarray:
        """Solve (G_1 x ... x G_d) c = b by per-axis banded solves along each mode."""
        c = np.asarray(b, dtype=float)
        for ell, gs in enumerate(self.grams):
            c = np.moveaxis(c, ell, 0)
            shape = c.shape
            c = gs.solve(c.reshape(shape[0], -1)).reshape(shape)
            c = np.moveaxis(c, 0, ell)
        return c

    def moment_tensor(self, f, g: int = None, quad_partitions=None) -> np.ndarray:
        """Tensor b with b_i = int f(x) prod_l N_{i_l}(x_l) dx.

        `f` is called as f(X_1, ..., X_d) on broadcastable coordinate arrays and
        may return values of shape (...,) or (..., m).  Quadrature uses g points
        per atom per axis on `quad_partitions` (defaults to the projector's own
        partitions); pass a finer nested partition to integrate splines of a
        deeper level exactly.
        """
        if g is None:
            g = max(max(self.orders), DEFAULT_QUAD_POINTS)
        if quad_partitions is None:
            quad_partitions = [s.partition for s in self.spaces]
        rules = [atom_quadrature(p, g) for p in quad_partitions]
        axis_nodes = [r.nodes.ravel() for r in rules]
        grids = np.meshgrid(*axis_nodes, indexing="ij", sparse=True)
        F = as_value_array(f(*grids), tuple(len(a) for a in axis_nodes), "integrand")
        # fold the weights into the collocation matrix of each axis
        out = F
        for ell in range(self.d):
            W = self.spaces[ell].basis_matrix(axis_nodes[ell])
            W *= rules[ell].weights.ravel()[:, None]
            out = np.moveaxis(np.tensordot(W.T, out, axes=([1], [ell])), 0, ell)
        return out

    def project_function(self, f, g: int = None, m: int = None,
                         quad_partitions=None) -> TensorSpline:
        """P f as a TensorSpline; reproduces f exactly when f lies in the space."""
        b = self.moment_tensor(f, g=g, quad_partitions=quad_partitions)
        c = self.solve_coefficients(b)
        return TensorSpline(self.spaces, c, m=m)

    def project_spline(self, ts: TensorSpline) -> TensorSpline:
        """Project a spline from another level; exact up to roundoff.

        Quadrature runs on the per-axis common refinement of the source and
        target partitions, where the integrand is a genuine polynomial on
        every atom regardless of which level is finer.
        """
        g = max(max(self.orders), max(s.order for s in ts.spaces))
        quad = [
            Partition1D(np.union1d(mine.partition.breakpoints, theirs.partition.breakpoints))
            for mine, theirs in zip(self.spaces, ts.spaces)
        ]
        f = _tensor_spline_callable(ts)
        return self.project_function(f, g=g, m=ts.m, quad_partitions=quad)

    def project_measure(self, theta, quad_partitions=None) -> TensorSpline:
        """P theta = sum_i (int N_i dtheta) N*_i for a hybrid measure theta.

        Passing the finest-level partitions as `quad_partitions` makes the
        density moments additive across levels, so sequences built level by
        level satisfy the martingale identity to roundoff even for densities
        the quadrature does not integrate sharply.
        """
        dims = self.dims
        m = theta.m
        if theta.d != self.d:
            raise ValueError(f"measure dimension {theta.d} != projector dimension {self.d}")
        if theta.density is not None:
            b = self.moment_tensor(theta.density, g=theta.density_quad_points,
                                   quad_partitions=quad_partitions)
            if b.shape[-1] not in (1, m):
                raise ValueError("density value dimension inconsistent with measure")
            if b.shape[-1] == 1 and m > 1:
                b = np.repeat(b, m, axis=-1)
        else:
            b = np.zeros(dims + (m,))
        for location, mass in theta.diracs:
            firsts, vals = [], []
            for ell, space in enumerate(self.spaces):
                iv = space.interval
                if not iv.lo < location[ell] <= iv.hi:
                    raise ValueError(f"Dirac location {tuple(location)} outside the domain")
                fi, va = space.eval_basis(location[ell])
                firsts.append(fi)
                vals.append(va)
            w = vals[0]
            for va in vals[1:]:
                w = np.multiply.outer(w, va)
            sl = tuple(slice(fi, fi + k) for fi, k in zip(firsts, self.orders))
            b[sl] += np.multiply.outer(w, np.asarray(mass, dtype=float))
        c = self.solve_coefficients(b)
        return TensorSpline(self.spaces, c, m=m)


def _tensor_spline_callable(ts: TensorSpline):
    def f(*grids):
        full = np.broadcast_arrays(*grids)
        pts = np.stack([a.ravel() for a in full], axis=-1)
        out = ts.eval_many(pts)
        return out.reshape(full[0].shape + (ts.m,))

    return f


# ---------------------------------------------------------------------------
# operator norm


@dataclass(frozen=True)
class OperatorNormEstimate:
    """Grid-sampled lower bound of sup_x int |K(x, y)| dy."""

    value: float
    per_axis: tuple
    samples_per_atom: int
    quad_points_per_atom: int
    window_atoms: int


def operator_norm_1d(gs: GramSystem, nx_per_atom: int = NORM_SAMPLES_PER_ATOM,
                     ny_per_atom: int = NORM_SAMPLES_PER_ATOM,
                     window: int = NORM_WINDOW_ATOMS,
                     block_atoms: int = 64) -> float:
    """sup_x int |K(x,y)| dy for K(x,y) = sum_i N_i(y) N*_i(x), sampled.

    x ranges over nx Chebyshev points per atom; the y-integral uses per-atom
    Gauss-Legendre and is truncated `window` atoms away from x, where the
    kernel has decayed far below roundoff.  The result is a lower bound of the
    true norm.

    One banded solve against the identity yields the inverse Gram; kernel
    values are then assembled per atom block from gathered inverse slabs,
    which keeps the cost linear in the number of samples times the window.
    """
    space = gs.space
    k = space.order
    p = space.partition
    n_atoms = p.n_atoms
    dim = space.dimension
    lo, hi = p.breakpoints[:-1], p.breakpoints[1:]
    j = np.arange(nx_per_atom)
    cheb = np.cos((2 * j + 1) * np.pi / (2 * nx_per_atom))
    xs_all = 0.5 * (hi - lo)[:, None] * cheb + 0.5 * (hi + lo)[:, None]
    yrule = atom_quadrature(p, ny_per_atom)
    if k == 1:
        # diagonal Gram: the kernel column at x is the indicator of A(x)
        # scaled by 1/|A(x)|, so the integral is the weight sum over A(x)
        diag = gs.band[0]
        vals = yrule.weights.sum(axis=1) / diag
        return float(vals.max())
    xfirst, xV = space.eval_basis_many(xs_all.ravel())
    _, yV = space.eval_basis_many(yrule.nodes.ravel())
    yVr = yV.reshape(n_atoms, ny_per_atom, k)
    wy = yrule.weights
    Ginv = cho_solve_banded((gs._chol, False), np.eye(dim), check_finite=False)
    best = 0.0
    for a0 in range(0, n_atoms, block_atoms):
        a1 = min(a0 + block_atoms, n_atoms)
        xsl = slice(a0 * nx_per_atom, a1 * nx_per_atom)
        ya0 = max(0, a0 - window)
        ya1 = min(n_atoms, a1 + window)
        rows = np.arange(ya0, min(ya1 + k - 1, dim))
        # dual coefficients restricted to the window rows, for all x in the block
        Dsub = np.zeros((len(rows), xsl.stop - xsl.start))
        for r in range(k):
            Dsub += Ginv[np.ix_(rows, xfirst[xsl] + r)] * xV[xsl, r][None, :]
        # spline values on the window's quadrature nodes: atom b uses rows b..b+k-1
        Dwin = np.lib.stride_tricks.sliding_window_view(Dsub, k, axis=0)
        vals = np.einsum("ugr,uxr->ugx", yVr[ya0:ya1], Dwin[: ya1 - ya0])
        S = np.einsum("ug,ugx->x", wy[ya0:ya1], np.abs(vals))
        best = max(best, float(S.max()))
    return best


def operator_norm_inf(tp: TensorProjector, nx_per_atom: int = NORM_SAMPLES_PER_ATOM,
                      ny_per_atom: int = NORM_SAMPLES_PER_ATOM,
                      window: int = NORM_WINDOW_ATOMS) -> OperatorNormEstimate:
    """Kernel norm of the tensor projector; factorizes over axes."""
    per_axis = tuple(
        operator_norm_1d(gs, nx_per_atom, ny_per_atom, window) for gs in tp.grams
    )
    return OperatorNormEstimate(
        value=float(np.prod(per_axis)),
        per_axis=per_axis,
        samples_per_atom=nx_per_atom,
        quad_points_per_atom=ny_per_atom,
        window_atoms=window,
    )


# ---------------------------------------------------------------------------
# geometric decay of the dual functions


@dataclass(frozen=True)
class DecayProfile:
    """Per-distance envelope of |N*_i(x)| * |conv(supp N_i u A(x))|.

    `values[s]` is the maximum over sampled x and all i at atom distance s
    between supp N_i and A(x).  q_hat/c_hat come from a log-linear fit over
    the entries above the roundoff floor; c_env rescales c_hat so that
    values[s] <= c_env * q_hat**s holds for every entry (an envelope, used
    whenever a true upper bound is needed).
    """

    distances: np.ndarray
    values: np.ndarray
    q_hat: float
    c_hat: float
    c_env: float
    fit_residual: float
    floor: float = PROFILE_FLOOR

    def envelope(self, s) -> np.ndarray:
        return self.c_env * self.q_hat ** np.asarray(s, dtype=float)


def decay_profile(gs: GramSystem, nx_per_atom: int = NORM_SAMPLES_PER_ATOM) -> DecayProfile:
    """Measure the geometric decay of the dual B-splines of one space."""
    space = gs.space
    k = space.order
    p = space.partition
    n_atoms = p.n_atoms
    dim = space.dimension
    if dim < 2 * k:
        raise ValueError(f"space dimension {dim} too small for a decay profile (need >= {2 * k})")
    bp = p.breakpoints
    sup_lo = np.maximum(np.arange(dim) - (k - 1), 0)
    sup_hi = np.minimum(np.arange(dim), n_atoms - 1)
    j = np.arange(nx_per_atom)
    cheb = np.cos((2 * j + 1) * np.pi / (2 * nx_per_atom))
    prof = np.zeros(n_atoms + k)
    for a in range(n_atoms):
        lo, hi = bp[a], bp[a + 1]
        xs = 0.5 * (hi - lo) * cheb + 0.5 * (hi + lo)
        D = np.abs(gs.duals_at(xs))  # (dim, nx)
        vmax = D.max(axis=1)
        dist = np.where(
            (a >= sup_lo) & (a <= sup_hi),
            0,
            np.minimum(np.abs(a - sup_lo), np.abs(a - sup_hi)),
        )
        conv_len = bp[np.maximum(sup_hi, a) + 1] - bp[np.minimum(sup_lo, a)]
        np.maximum.at(prof, dist, vmax * conv_len)
    nz = np.flatnonzero(prof > 0)
    smax = nz[-1] if len(nz) else 0
    distances = np.arange(smax + 1)
    values = prof[: smax + 1]
    good = values > PROFILE_FLOOR
    if good.sum() >= 2:
        slope, intercept = np.polyfit(distances[good], np.log(values[good]), 1)
        q_hat = float(np.exp(slope))
        c_hat = float(np.exp(intercept))
        resid = float(
            np.sqrt(np.mean((np.log(values[good]) - (slope * distances[good] + intercept)) ** 2))
        )
    else:
        # k=1: duals live on a single atom, the profile vanishes beyond s=0
        q_hat, c_hat, resid = 0.0, float(values[0]), 0.0
    if q_hat > 0:
        c_env = float(np.max(values[good] / q_hat ** distances[good]))
    else:
        c_env = float(values[0])
    return DecayProfile(
        distances=distances,
        values=values,
        q_hat=q_hat,
        c_hat=c_hat,
        c_env=c_env,
        fit_residual=resid,
    )


def dual_eval(gs: GramSystem, i: int, x: float) -> float:
    """Module-level convenience mirroring GramSystem.dual_eval."""
    return gs.dual_eval(i, x)
