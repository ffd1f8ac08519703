"""Martingale spline sequences and pointwise convergence probes.

A sequence (g_n) with P_n g_{n+1} = g_n generalizes a martingale: for order 1
the projector is the conditional expectation.  Here g_n is produced either by
projecting a fixed function f level by level (g_n = P_n f) or from a hybrid
measure nu via g_n = sum_i (int N_{n,i} d nu) N*_{n,i}; both satisfy the
martingale spline identity because the spaces are nested and the moment of a
coarse B-spline against nu is level independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bspline import TensorSpline, as_value_array, atom_quadrature
from .filtration import TensorFiltration
from .measures import HybridMeasure
from .projector import TensorProjector

PROBE_BREAKPOINT_GAP = 1e-9  # probe points stay this far from every breakpoint


@dataclass
class MartingaleSplineSequence:
    F: TensorFiltration
    orders: tuple
    splines: list              # TensorSpline per level, index n-1
    source_kind: str           # "function" | "measure" | "spline"
    l1_norms: np.ndarray
    m: int = 1

    @property
    def n_levels(self) -> int:
        return len(self.splines)

    def level(self, n: int) -> TensorSpline:
        return self.splines[n - 1]


def _l1_norm(ts: TensorSpline, g: int = 8) -> float:
    """int ||g_n|| d lambda^d by per-atom quadrature on the spline's own grid."""
    rules = [atom_quadrature(s.partition, g) for s in ts.spaces]
    axis_nodes = [r.nodes.ravel() for r in rules]
    grids = np.meshgrid(*axis_nodes, indexing="ij", sparse=True)
    full = np.broadcast_arrays(*grids)
    pts = np.stack([a.ravel() for a in full], axis=-1)
    vals = np.linalg.norm(ts.eval_many(pts), axis=-1).reshape(full[0].shape)
    w = rules[0].weights.ravel()
    for r in rules[1:]:
        w = np.multiply.outer(w, r.weights.ravel())
    return float((w * vals).sum())


def make_sequence(F: TensorFiltration, source, orders, N_max: int = None,
                  quad_points: int = None) -> MartingaleSplineSequence:
    """Build g_1, ..., g_{N_max} from a function or a HybridMeasure source.

    Density and function moments are integrated on the finest-level partition
    with a fixed rule, which makes the discrete moments exactly additive
    across levels: the produced sequence satisfies P_n g_{n+1} = g_n to
    roundoff regardless of how rough the source is.
    """
    if N_max is None:
        N_max = F.n_levels
    if isinstance(orders, int):
        orders = (orders,) * F.d
    finest = [F.axes[ell].level(F.n_levels) for ell in range(F.d)]
    splines, norms = [], []
    for n in range(1, N_max + 1):
        tp = TensorProjector.for_level(F, n, orders)
        if isinstance(source, HybridMeasure):
            g_n = tp.project_measure(source, quad_partitions=finest)
            kind = "measure"
        elif isinstance(source, TensorSpline):
            g_n = tp.project_spline(source)
            kind = "spline"
        elif callable(source):
            # the finest grid already resolves the source, so max(k, 4) points
            # per finest atom is the workhorse rule here
            g = quad_points or max(max(orders), 4)
            g_n = tp.project_function(source, g=g, quad_partitions=finest)
            kind = "function"
        else:
            raise ValueError(f"unsupported source type {type(source)!r}")
        splines.append(g_n)
        norms.append(_l1_norm(g_n))
    return MartingaleSplineSequence(
        F=F,
        orders=tuple(orders),
        splines=splines,
        source_kind=kind,
        l1_norms=np.asarray(norms),
        m=splines[0].m,
    )


def sample_probe_points(F: TensorFiltration, n_points: int, seed: int = 0,
                        gap: float = PROBE_BREAKPOINT_GAP,
                        exclude=None) -> np.ndarray:
    """Uniform points of I^d, rejected near any breakpoint of any level.

    Almost-everywhere statements cannot be probed on the grid itself, where
    the half-open conventions matter; rejection keeps every coordinate at
    least `gap` away from every breakpoint.  `exclude` is an optional list of
    (point, radius) pairs, used to keep probes away from Dirac locations whose
    finite-depth remnant would otherwise dominate a convergence measurement.
    """
    rng = np.random.default_rng(seed)
    iv = F.interval
    all_bps = [
        np.unique(np.concatenate([lvl.breakpoints for lvl in ax.levels]))
        for ax in F.axes
    ]
    exclude = [
        (np.atleast_1d(np.asarray(pt, dtype=float)), float(rad)) for pt, rad in (exclude or [])
    ]
    out = np.empty((n_points, F.d))
    got = 0
    while got < n_points:
        cand = iv.lo + (iv.hi - iv.lo) * rng.random((2 * (n_points - got) + 8, F.d))
        ok = np.ones(len(cand), dtype=bool)
        for ell in range(F.d):
            j = np.searchsorted(all_bps[ell], cand[:, ell])
            left = np.abs(cand[:, ell] - all_bps[ell][np.clip(j - 1, 0, None)])
            right = np.abs(all_bps[ell][np.clip(j, None, len(all_bps[ell]) - 1)] - cand[:, ell])
            ok &= (left > gap) & (right > gap)
        for pt, rad in exclude:
            ok &= np.abs(cand - pt[None, :]).max(axis=1) > rad
        cand = cand[ok]
        take = min(len(cand), n_points - got)
        out[got : got + take] = cand[:take]
        got += take
    return out


def verify_martingale_property(seq: MartingaleSplineSequence, n_probe: int = 200,
                               seed: int = 0) -> float:
    """max over n and probe points of ||P_n g_{n+1}(y) - g_n(y)||."""
    if seq.n_levels < 2:
        raise ValueError("need at least two levels")
    pts = sample_probe_points(seq.F, n_probe, seed=seed)
    worst = 0.0
    for n in range(1, seq.n_levels):
        tp = TensorProjector.for_level(seq.F, n, seq.orders)
        proj = tp.project_spline(seq.level(n + 1))
        err = np.linalg.norm(proj.eval_many(pts) - seq.level(n).eval_many(pts), axis=-1)
        worst = max(worst, float(err.max()))
    return worst


@dataclass
class ConvergenceProbe:
    """Per-point error trajectories ||g_n(y) - ref(y)|| for seeded probe points."""

    points: np.ndarray            # (n_points, d)
    errors: np.ndarray            # (n_levels, n_points)
    reference_kind: str
    final_tol: float
    fraction_below_tol: float
    median_decay_rate: float      # median over points of the log-error slope per level

    def trajectories(self, j: int) -> np.ndarray:
        return self.errors[:, j]


def convergence_probe(seq: MartingaleSplineSequence, reference=None, points=None,
                      n_points: int = 200, seed: int = 0,
                      final_tol: float = 1e-3) -> ConvergenceProbe:
    """Track ||g_n(y) - g_ref(y)|| at probe points across levels.

    `reference` may be a callable (the known limit), a TensorSpline, or None,
    in which case the deepest-level spline serves as the oracle for the
    projection onto the closure of the union of the spaces.
    """
    if points is None:
        points = sample_probe_points(seq.F, n_points, seed=seed)
    points = np.asarray(points, dtype=float)
    if reference is None:
        ref_vals = seq.level(seq.n_levels).eval_many(points)
        kind = "deepest-level"
        n_use = seq.n_levels - 1
    elif isinstance(reference, TensorSpline):
        ref_vals = reference.eval_many(points)
        kind = "spline"
        n_use = seq.n_levels
    else:
        raw = reference(*[points[:, ell] for ell in range(seq.F.d)])
        ref_vals = as_value_array(raw, (len(points),), "reference")
        kind = "callable"
        n_use = seq.n_levels
    errors = np.empty((n_use, len(points)))
    for n in range(1, n_use + 1):
        vals = seq.level(n).eval_many(points)
        errors[n - 1] = np.linalg.norm(vals - ref_vals, axis=-1)
    final = errors[-1]
    frac = float(np.mean(final < final_tol))
    rate = _median_decay_rate(errors)
    return ConvergenceProbe(
        points=points,
        errors=errors,
        reference_kind=kind,
        final_tol=final_tol,
        fraction_below_tol=frac,
        median_decay_rate=rate,
    )


def _median_decay_rate(errors: np.ndarray) -> float:
    """Median over points of the slope of log(error) against level."""
    n_levels, n_points = errors.shape
    if n_levels < 2:
        return 0.0
    slopes = []
    lv = np.arange(n_levels)
    for j in range(n_points):
        e = errors[:, j]
        good = e > 1e-300
        if good.sum() >= 2:
            slopes.append(np.polyfit(lv[good], np.log(e[good]), 1)[0])
    return float(np.median(slopes)) if slopes else 0.0
