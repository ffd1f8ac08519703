"""Experiment runners: decay, shadrin, weaktype, covering, converge, singular, nondense.

Each experiment consumes a fully explicit config (every parameter, seed, and
depth spelled out), writes `<name>.csv` (long-format data), a
`<name>.summary.json` with per-assertion pass/fail, and `<name>.meta.json`
with versions and a timestamp.  Outputs are deterministic for a fixed config
and seed: data files are byte-identical across runs (the timestamp lives only
in the meta file).  The exit status is zero iff every asserted bound holds.
"""

from __future__ import annotations

import csv
import itertools
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bspline import SplineSpace1D
from .filtration import AtomSet, FiltrationSpec, TensorFiltration, build_filtration
from .maximal import (
    covering_constant,
    hl_weak_type_ratio,
    maximal_field,
    verify_covering_bound,
    weak_series_total,
)
from .measures import HybridMeasure, compile_masses, density_catalog, measure_from_config
from .nondense import detect_v_sets, frozen_subspace, limit_dual_table
from .projector import GramSystem, TensorProjector, decay_profile, operator_norm_inf
from .sequences import convergence_probe, make_sequence, sample_probe_points, verify_martingale_property

EXPERIMENT_NAMES = (
    "decay",
    "shadrin",
    "weaktype",
    "covering",
    "converge",
    "singular",
    "nondense",
)


@dataclass
class Assertion:
    name: str
    bound: float
    observed: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "bound": self.bound,
            "observed": self.observed,
            "pass": self.passed,
        }


class AssertionLog:
    def __init__(self):
        self.items = []

    def check_le(self, name: str, observed: float, bound: float) -> bool:
        ok = bool(observed <= bound)
        self.items.append(Assertion(name, float(bound), float(observed), ok))
        return ok

    def check_true(self, name: str, flag: bool) -> bool:
        self.items.append(Assertion(name, 1.0, 1.0 if flag else 0.0, bool(flag)))
        return bool(flag)

    @property
    def all_pass(self) -> bool:
        return all(a.passed for a in self.items)


# ---------------------------------------------------------------------------
# function catalog


def function_catalog(name: str, d: int, **params):
    """Named test functions spanning the hypotheses used across the experiments:
    constants, polynomials, tensor-smooth functions, indicator-like steep
    sigmoids, integrable singularities, and single-atom spikes."""
    if name in ("constant", "polynomial", "singular", "sigmoid"):
        return density_catalog(name, d, **params)
    if name == "smooth-sine":
        amp = float(params.get("amplitude", 1.0))
        freq = float(params.get("frequency", 1.0))
        offset = float(params.get("offset", 0.0))

        def sine(*grids):
            out = amp
            for ell, gax in enumerate(grids):
                out = out * np.sin(2 * np.pi * freq * np.asarray(gax) + 0.3 * (ell + 1))
            return out + offset

        return sine
    if name == "smooth-exp":
        center = np.atleast_1d(np.asarray(params.get("center", [0.4] * d), float))

        def gauss(*grids):
            r2 = sum((np.asarray(g) - center[ell]) ** 2 for ell, g in enumerate(grids))
            return np.exp(-4.0 * r2)

        return gauss
    if name == "spike":
        lo = np.atleast_1d(np.asarray(params["lo"], float))
        hi = np.atleast_1d(np.asarray(params["hi"], float))
        height = float(params.get("height", 1.0 / np.prod(hi - lo)))

        def spike(*grids):
            inside = np.ones(np.broadcast_shapes(*(np.shape(g) for g in grids)), dtype=bool)
            for ell, gax in enumerate(grids):
                inside &= (np.asarray(gax) > lo[ell]) & (np.asarray(gax) <= hi[ell])
            return np.where(inside, height, 0.0)

        return spike
    raise ValueError(f"unknown catalog function {name!r}")


# ---------------------------------------------------------------------------
# individual experiments


def _filtration(cfg_rule, d, interval, depth, seed) -> TensorFiltration:
    spec = FiltrationSpec(d=d, interval=tuple(interval), n_levels=depth,
                          rules=cfg_rule, seed=seed)
    return build_filtration(spec)


def run_decay(cfg: dict):
    p = cfg["params"]
    depth = int(cfg["depth"])
    rows = [("seed", "level", "k", "s", "max_value", "q_hat", "c_hat")]
    log = AssertionLog()
    q_cap = float(p.get("q_max", 0.99))
    worst_q, worst_resid = {}, {}
    for k in p["orders"]:
        for s_i in range(int(p["n_seeds"])):
            seed = int(cfg["seed"]) + s_i
            F = _filtration([dict(p["rule"])], 1, p["interval"], depth, seed)
            space = SplineSpace1D(F.axes[0].level(depth), int(k))
            if space.dimension < 2 * int(k):
                raise ValueError("decay experiment needs a richer final level; increase depth")
            prof = decay_profile(GramSystem(space), nx_per_atom=int(p.get("samples_per_atom", 8)))
            for s, v in zip(prof.distances, prof.values):
                rows.append((seed, depth, int(k), int(s), v, prof.q_hat, prof.c_hat))
            worst_q[int(k)] = max(worst_q.get(int(k), 0.0), prof.q_hat)
            worst_resid[int(k)] = max(worst_resid.get(int(k), 0.0), prof.fit_residual)
            mono_ok = True
            vals = prof.values
            for s in range(int(k), len(vals) - 1):
                if vals[s + 1] > max(vals[s] * (1 + 1e-9), prof.floor):
                    mono_ok = False
            log.check_true(f"decay_monotone_beyond_k_k{k}_seed{seed}", mono_ok)
    for k, q in sorted(worst_q.items()):
        log.check_le(f"q_hat_below_cap_k{k}", q, q_cap)
    return rows, log, {"worst_q_hat": worst_q, "worst_fit_residual": worst_resid}


def _dense_tensor_norm_2d(tp: TensorProjector, nx: int = 6, ny: int = 6) -> float:
    """Direct 2-d kernel norm on a small space, without using factorization.

    Assembles |K(x, y)| = |K1(x1,y1) K2(x2,y2)| on full sample/quadrature
    grids and integrates in both y variables jointly; the product path must
    reproduce this to roundoff.
    """
    from .bspline import atom_quadrature

    mats = []
    for gs in tp.grams:
        space = gs.space
        part = space.partition
        lo, hi = part.breakpoints[:-1], part.breakpoints[1:]
        j = np.arange(nx)
        cheb = np.cos((2 * j + 1) * np.pi / (2 * nx))
        xs = (0.5 * (hi - lo)[:, None] * cheb + 0.5 * (hi + lo)[:, None]).ravel()
        rule = atom_quadrature(part, ny)
        ys = rule.nodes.ravel()
        wy = rule.weights.ravel()
        D = gs.duals_at(xs)                       # (dim, n_x)
        B = space.basis_matrix(ys)                # (n_y, dim)
        mats.append((B @ D, wy))                  # kernel K(x, y) on the grid
    (K1, w1), (K2, w2) = mats
    # integral over (y1, y2) of |K1(x1,y1)| |K2(x2,y2)| for every (x1, x2)
    I1 = w1 @ np.abs(K1)                          # (n_x1,)
    K2abs = w2 @ np.abs(K2)                       # (n_x2,)
    return float(np.max(np.outer(I1, K2abs)))


def run_shadrin(cfg: dict):
    p = cfg["params"]
    depth = int(cfg["depth"])
    rows = [("seed", "level", "k", "s", "max_value", "q_hat", "c_hat")]
    log = AssertionLog()
    k1_tol = float(p.get("k1_tol", 1e-12))
    var_bound = float(p.get("variation_bound", 0.05))
    nx = int(p.get("samples_per_atom", 8))
    ny = int(p.get("quad_per_atom", 8))
    window = int(p.get("window", 64))
    for k in p["orders"]:
        for s_i in range(int(p["n_seeds"])):
            seed = int(cfg["seed"]) + s_i
            F = _filtration([dict(p["rule"])], 1, p["interval"], depth, seed)
            norms = []
            for n in range(1, depth + 1):
                tp = TensorProjector.for_level(F, n, int(k))
                est = operator_norm_inf(tp, nx_per_atom=nx, ny_per_atom=ny, window=window)
                norms.append(est.value)
                # norm sweeps share the decay CSV schema; s and the fit columns are idle
                rows.append((seed, n, int(k), 0, est.value, float("nan"), float("nan")))
            norms = np.asarray(norms)
            if int(k) == 1:
                log.check_le(
                    f"k1_norm_is_one_seed{seed}", float(np.max(np.abs(norms - 1.0))), k1_tol
                )
            else:
                spread = float((norms.max() - norms.min()) / norms.max())
                log.check_le(f"depth_variation_k{k}_seed{seed}", spread, var_bound)
    tc = p.get("tensor_check")
    if tc:
        F2 = _filtration([dict(p["rule"]), dict(p["rule"])], 2, p["interval"],
                         int(tc["depth"]), int(cfg["seed"]))
        tp2 = TensorProjector.for_level(F2, int(tc["depth"]), tuple(tc["orders"]))
        est = operator_norm_inf(tp2, nx_per_atom=6, ny_per_atom=6, window=window)
        direct = _dense_tensor_norm_2d(tp2, nx=6, ny=6)
        log.check_le(
            "tensor_norm_equals_axis_product",
            float(abs(est.value - direct)),
            float(p.get("tensor_tol", 1e-9)),
        )
    return rows, log, {}


def _exact_weak_ratio(values: np.ndarray, vols: np.ndarray) -> float:
    """sup over t > 0 of t * vol{field > t} for an atomwise-constant field."""
    v = values.ravel()
    w = vols.ravel()
    order = np.argsort(v)[::-1]
    v_sorted = v[order]
    cum = np.cumsum(w[order])          # vol{field >= v_sorted[j]}
    pos = v_sorted > 0
    if not pos.any():
        return 0.0
    return float(np.max(v_sorted[pos] * cum[pos]))


def run_weaktype(cfg: dict):
    p = cfg["params"]
    rows = [("case", "q", "spike", "operator", "ratio", "bound")]
    log = AssertionLog()
    rng = np.random.default_rng(int(cfg["seed"]))
    for case in p["cases"]:
        d = int(case["d"])
        depth = int(case["depth"])
        orders = tuple(case["orders"])
        F = _filtration([dict(case["rule"])] * d, d, p["interval"], depth, int(cfg["seed"]))
        shape = F.level_shape(depth)
        vols = F.atom_volumes(depth)
        spikes = []
        for _ in range(int(case["n_spikes"])):
            idx = tuple(int(rng.integers(0, s)) for s in shape)
            rect = F.atom_rectangle(depth, idx)
            spikes.append((idx, rect))
        case_id = f"d{d}"
        spike_masses = []
        for idx, rect in spikes:
            theta = HybridMeasure(
                d=d,
                density=function_catalog("spike", d, lo=rect.lo, hi=rect.hi),
                density_quad_points=4,
            )
            spike_masses.append(compile_masses(theta, F))
        # intrinsic maximal operator on spike measures, for each q
        for q in p["q_values"]:
            bound = covering_constant(float(q), d) * weak_series_total(float(q), d)
            for si, masses in enumerate(spike_masses):
                field_ = maximal_field(float(q), masses, F, K=1, N_max=depth)
                ratio = _exact_weak_ratio(field_.values, vols)  # ||f||_1 = 1
                rows.append((case_id, float(q), si, "M", ratio, bound))
                log.check_le(f"weaktype_M_{case_id}_q{q}_spike{si}", ratio, bound)
        # maximal function of the spline projectors, bound via measured decay
        tp_fine = TensorProjector.for_level(F, depth, orders)
        profiles = [decay_profile(gs) for gs in tp_fine.grams]
        q_hat = max(pr.q_hat for pr in profiles)
        c_prod = float(np.prod([max(pr.c_env, 1.0) for pr in profiles]))
        if q_hat == 0.0:
            c_k = c_prod * float(np.prod(orders))
            bound_p = c_k * covering_constant(0.25, d) * weak_series_total(0.25, d)
            q_use = 0.25
        else:
            c_k = c_prod * float(np.prod(orders)) * q_hat ** (-float(sum(orders)))
            bound_p = c_k * covering_constant(q_hat, d) * weak_series_total(q_hat, d)
            q_use = q_hat
        finest_parts = [s.partition for s in tp_fine.spaces]
        sample_pts = [0.5 * (fp.breakpoints[:-1] + fp.breakpoints[1:]) for fp in finest_parts]
        grids = np.meshgrid(*sample_pts, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        for si, (idx, rect) in enumerate(spikes):
            f = function_catalog("spike", d, lo=rect.lo, hi=rect.hi)
            sup_field = np.zeros(shape)
            for n in range(1, depth + 1):
                tp = TensorProjector.for_level(F, n, orders)
                pn = tp.project_function(f, g=max(orders), quad_partitions=finest_parts)
                vals = np.linalg.norm(pn.eval_many(pts), axis=-1).reshape(shape)
                sup_field = np.maximum(sup_field, vals)
            ratio = _exact_weak_ratio(sup_field, vols)
            rows.append((case_id, q_use, si, "supPn", ratio, bound_p))
            log.check_le(f"weaktype_supPn_{case_id}_spike{si}", ratio, bound_p)
        # Hardy-Littlewood baseline, d = 1 only
        if d == 1:
            part = F.axes[0].level(depth)
            t_grid = np.logspace(-2, 3, 40)
            for si, (idx, rect) in enumerate(spikes):
                f = function_catalog("spike", 1, lo=rect.lo, hi=rect.hi)
                ratio, _ = hl_weak_type_ratio(f, part, t_grid, g=4)
                rows.append((case_id, 0.0, si, "HL", ratio, 3.0))
                log.check_le(f"weaktype_HL_spike{si}", ratio, 3.0 * (1 + 1e-12))
    return rows, log, {}


def run_covering(cfg: dict):
    p = cfg["params"]
    rows = [("case", "q", "seed", "t", "lhs_volume", "rhs_bound", "ratio")]
    log = AssertionLog()
    overall = 0.0
    for case in p["cases"]:
        d = int(case["d"])
        depth = int(case["depth"])
        K = int(case.get("K", 2))
        for s_i in range(int(p["n_seeds"])):
            seed = int(cfg["seed"]) + s_i
            rng = np.random.default_rng(seed)
            F = _filtration([dict(case["rule"])] * d, d, p["interval"], depth, seed)
            theta = _random_nonnegative_measure(rng, d, p["interval"])
            masses = compile_masses(theta, F)
            shape_K = F.level_shape(K)
            B = _random_atom_block(rng, K, shape_K)
            for q in p["q_values"]:
                report = verify_covering_bound(F, masses, float(q), K, depth, B,
                                               _log_t_grid(masses, F, float(q), K, depth,
                                                           int(p.get("t_points", 20))))
                for t, lhs, rhs in zip(report.t_grid, report.lhs_volumes, report.rhs_bounds):
                    ratio = lhs / rhs if rhs > 0 else 0.0
                    rows.append((f"d{d}", float(q), seed, t, lhs, rhs, ratio))
                overall = max(overall, report.max_ratio)
                log.check_le(f"covering_d{d}_q{q}_seed{seed}", report.max_ratio, 1.0)
    return rows, log, {"max_ratio": overall}


def _log_t_grid(masses, F, q, K, depth, n_points):
    field_ = maximal_field(q, masses, F, K=K, N_max=depth)
    top = float(field_.values.max())
    if top <= 0:
        return np.logspace(-3, 0, n_points)
    return np.logspace(np.log10(top) - 3, np.log10(top) + 0.3, n_points)


def _random_nonnegative_measure(rng, d, interval):
    lo, hi = float(interval[0]), float(interval[1])
    c = float(rng.uniform(0.2, 1.5))
    slope = rng.uniform(-0.8, 0.8, size=d) * c

    def dens(*grids):
        out = c
        for ell, gax in enumerate(grids):
            out = out + slope[ell] * (np.asarray(gax) - lo) / (hi - lo)
        return np.maximum(np.broadcast_arrays(out, *grids)[0], 0.0)

    n_diracs = int(rng.integers(1, 4))
    diracs = []
    for _ in range(n_diracs):
        loc = lo + (hi - lo) * rng.uniform(0.05, 0.95, size=d)
        diracs.append((loc, float(rng.uniform(0.3, 2.0))))
    return HybridMeasure(d=d, density=dens, diracs=diracs, density_quad_points=4)


def _random_atom_block(rng, level, shape):
    ranges = []
    for s in shape:
        w = int(rng.integers(1, max(2, s // 2 + 1)))
        start = int(rng.integers(0, s - w + 1))
        ranges.append(range(start, start + w))
    return AtomSet(level=level, members=frozenset(itertools.product(*ranges)))


def run_converge(cfg: dict):
    p = cfg["params"]
    rows = [("case", "function", "level", "max_error", "fraction_below_tol")]
    log = AssertionLog()
    tol = float(p.get("tol", 1e-3))
    for case in p["cases"]:
        d = int(case["d"])
        depth = int(case["depth"])
        orders = tuple(case["orders"])
        F = _filtration([{"name": "uniform-bisect-all"}] * d, d, p["interval"], depth,
                        int(cfg["seed"]))
        for fname in p["catalog"]:
            f = function_catalog(fname, d)
            seq = make_sequence(F, f, orders, quad_points=int(p.get("quad_points", 8)))
            probe = convergence_probe(
                seq, reference=f, n_points=int(p["n_probes"]), seed=int(cfg["seed"]),
                final_tol=tol,
            )
            for n in range(1, seq.n_levels + 1):
                below = float(np.mean(probe.errors[n - 1] < tol))
                rows.append((f"d{d}_k{'x'.join(map(str, orders))}", fname, n,
                             float(probe.errors[n - 1].max()), below))
            mart = verify_martingale_property(seq, n_probe=100, seed=int(cfg["seed"]))
            log.check_le(f"martingale_d{d}_{fname}", mart, 1e-9)
            log.check_le(f"converge_d{d}_{fname}_fraction", 1.0 - probe.fraction_below_tol, 0.0)
    return rows, log, {}


def run_singular(cfg: dict):
    p = cfg["params"]
    rows = [("probe", "level", "total_error", "dirac_value", "distance", "conv_volume")]
    log = AssertionLog()
    d = int(p["d"])
    depth = int(cfg["depth"])
    orders = tuple(p["orders"])
    F = _filtration([{"name": "uniform-bisect-all"}] * d, d, p["interval"], depth,
                    int(cfg["seed"]))
    theta = measure_from_config(p["measure"], d)
    sing = HybridMeasure(d=d, diracs=theta.diracs)
    seq = make_sequence(F, theta, orders)
    # keep probes a few finest atoms away from the Diracs: the finite-depth
    # remnant there is quantified by the decay-slope check below instead
    widest = max(float(F.axes[ell].level(depth).widths.max()) for ell in range(d))
    exclusion = [(loc, 16 * widest) for loc, _ in theta.diracs]
    points = sample_probe_points(F, int(p["n_probes"]), seed=int(cfg["seed"]),
                                 exclude=exclusion)
    probe = convergence_probe(seq, reference=theta.density, points=points,
                              final_tol=float(p.get("tol", 1e-3)))
    log.check_le("density_limit_fraction", 1.0 - probe.fraction_below_tol, 0.0)
    mart = verify_martingale_property(seq, n_probe=100, seed=int(cfg["seed"]))
    log.check_le("martingale_property", mart, 1e-9)
    # Dirac part: pointwise geometric decay at the probes
    from .filtration import atom_of

    space_fine = SplineSpace1D(F.axes[0].level(depth), orders[0])
    prof = decay_profile(GramSystem(space_fine))
    x0 = np.asarray(theta.diracs[0][0], float)
    n_pts = len(points)
    dirac_vals = np.empty((depth, n_pts))
    dists = np.empty((depth, n_pts), dtype=int)
    convs = np.empty((depth, n_pts))
    for n in range(1, depth + 1):
        tp = TensorProjector.for_level(F, n, orders)
        vals = tp.project_measure(sing).eval_many(points)
        dirac_vals[n - 1] = np.linalg.norm(vals, axis=-1)
        i_x0, _ = atom_of(F, n, x0)
        for j in range(n_pts):
            i_y, _ = atom_of(F, n, points[j])
            dists[n - 1, j] = sum(abs(a - b) for a, b in zip(i_x0, i_y))
            conv = 1.0
            for ell in range(d):
                bp = F.axes[ell].level(n).breakpoints
                conv *= bp[max(i_x0[ell], i_y[ell]) + 1] - bp[min(i_x0[ell], i_y[ell])]
            convs[n - 1, j] = conv
            rows.append((j, n, float(probe.errors[n - 1][j]),
                         float(dirac_vals[n - 1, j]), int(dists[n - 1, j]), conv))
    slopes = []
    for j in range(n_pts):
        scaled = dirac_vals[:, j] * convs[:, j]
        good = scaled > 1e-250
        ss = dists[good, j].astype(float)
        if good.sum() >= 3 and ss[-1] > ss[0]:
            slopes.append(np.polyfit(ss, np.log(scaled[good]), 1)[0])
    slope = float(np.median(slopes))
    target = float(np.log(prof.q_hat))
    log.check_le("dirac_decay_slope_within_20pct", float(abs(slope - target)),
                 0.2 * abs(target))
    return rows, log, {"median_slope": slope, "log_q_hat": target}


def run_nondense(cfg: dict):
    p = cfg["params"]
    rows = [("case", "quantity", "index", "level", "value")]
    log = AssertionLog()
    delta_tol = float(p.get("delta_tol", 1e-8))
    limit_tol = float(p.get("limit_tol", 1e-6))
    for case in p["cases"]:
        d = int(case["d"])
        depth = int(case["depth"])
        seq_depth = int(case.get("sequence_depth", depth))
        orders = tuple(case["orders"])
        rules = [dict(r) for r in case["rules"]]
        cid = f"d{d}"
        # limit-dual assertions live on axis 1 alone; the same rule and seed
        # reproduce the d-dimensional build's first axis level by level
        F1 = _filtration([rules[0]], 1, p["interval"], depth, int(cfg["seed"]))
        report = detect_v_sets(F1.axes[0], float(case["v_tolerance"]))
        log.check_true(f"{cid}_v_interval_found", len(report.intervals) >= 1)
        if not report.intervals:
            continue
        V = report.intervals[0]
        rows.append((cid, "v_interval_lo", 0, depth, V.interval.lo))
        rows.append((cid, "v_interval_hi", 0, depth, V.interval.hi))
        rng = np.random.default_rng(int(cfg["seed"]))
        iv = V.interval
        probes1 = iv.lo + (iv.hi - iv.lo) * rng.uniform(0.05, 0.95, int(p.get("n_probes", 16)))
        n_stable = (V.atom_range[1] - V.atom_range[0] + 1) + orders[0] - 1
        worst_delta = 0.0
        for r in range(n_stable):
            table = limit_dual_table(F1.axes[0], V, orders[0], r, probes1)
            for li, n in enumerate(table.levels):
                rows.append((cid, f"dual_r{r}", r, int(n), float(np.max(np.abs(table.values[li])))))
            if len(table.deltas):
                worst_delta = max(worst_delta, float(table.deltas[-1]))
            log.check_le(f"{cid}_oracle_gap_r{r}", table.oracle_gap, limit_tol)
            log.check_true(f"{cid}_limit_decay_estimate_r{r}", table.decay_ok)
        log.check_le(f"{cid}_cauchy_delta_final", worst_delta, delta_tol)
        # martingale sequence limit on the frozen region vs the clamped oracle;
        # the frozen atom is wide, so the finest-grid rule needs real order here
        F = _filtration(rules, d, p["interval"], seq_depth, int(cfg["seed"]))
        f = function_catalog(case.get("function", "smooth-exp"), d)
        seq = make_sequence(F, f, orders, quad_points=10)
        limit_space = frozen_subspace(F.axes[0], V, orders[0])
        if d == 1:
            probe_pts = probes1[:, None]
            tp_limit = TensorProjector([limit_space])
        else:
            other = rng.uniform(0.05, 0.95, (len(probes1), d - 1))
            probe_pts = np.column_stack([probes1] + [other[:, j] for j in range(d - 1)])
            deep_spaces = [limit_space] + [
                SplineSpace1D(F.axes[ell].level(seq_depth), orders[ell])
                for ell in range(1, d)
            ]
            tp_limit = TensorProjector(deep_spaces)
        oracle = tp_limit.project_function(f, g=10)
        final_vals = seq.level(seq_depth).eval_many(probe_pts)
        oracle_vals = oracle.eval_many(probe_pts)
        gap = float(np.max(np.linalg.norm(final_vals - oracle_vals, axis=-1)))
        rows.append((cid, "sequence_vs_clamped_oracle", 0, seq_depth, gap))
        log.check_le(f"{cid}_sequence_limit_matches_oracle", gap, limit_tol)
    return rows, log, {}


RUNNERS = {
    "decay": run_decay,
    "shadrin": run_shadrin,
    "weaktype": run_weaktype,
    "covering": run_covering,
    "converge": run_converge,
    "singular": run_singular,
    "nondense": run_nondense,
}


# ---------------------------------------------------------------------------
# configs and IO


def default_config(name: str) -> dict:
    """Fully explicit default config for each experiment."""
    base_rule = {"name": "random-atom-bisect", "p_split": 0.7,
                 "split_range": [0.35, 0.65], "base_atoms": 2}
    if name == "decay":
        return {
            "experiment": "decay",
            "seed": 1001,
            "depth": 8,
            "params": {
                "orders": [1, 2, 3, 4],
                "n_seeds": 20,
                "interval": [0.0, 1.0],
                "rule": base_rule,
                "samples_per_atom": 8,
                "q_max": 0.99,
            },
        }
    if name == "shadrin":
        return {
            "experiment": "shadrin",
            "seed": 2002,
            "depth": 10,
            "params": {
                "orders": [1, 2, 3, 4],
                "n_seeds": 20,
                "interval": [0.0, 1.0],
                "rule": {"name": "uniform-bisect-all", "base_atoms": 3, "base_jitter": 0.5},
                "samples_per_atom": 8,
                "quad_per_atom": 8,
                "window": 64,
                "variation_bound": 0.05,
                "k1_tol": 1e-12,
                "tensor_tol": 1e-9,
                "tensor_check": {"d": 2, "depth": 3, "orders": [2, 2]},
            },
        }
    if name == "weaktype":
        return {
            "experiment": "weaktype",
            "seed": 3003,
            "depth": 8,
            "params": {
                "interval": [0.0, 1.0],
                "q_values": [0.3, 0.5, 0.8],
                "cases": [
                    {"d": 1, "depth": 8, "orders": [2], "n_spikes": 8, "rule": base_rule},
                    {"d": 2, "depth": 5, "orders": [2, 2], "n_spikes": 4, "rule": base_rule},
                ],
            },
        }
    if name == "covering":
        return {
            "experiment": "covering",
            "seed": 4004,
            "depth": 8,
            "params": {
                "interval": [0.0, 1.0],
                "q_values": [0.3, 0.5, 0.8],
                "n_seeds": 30,
                "t_points": 20,
                "cases": [
                    {"d": 1, "depth": 8, "K": 2, "rule": base_rule},
                    {"d": 2, "depth": 7, "K": 2, "rule": base_rule},
                ],
            },
        }
    if name == "converge":
        return {
            "experiment": "converge",
            "seed": 5005,
            "depth": 8,
            "params": {
                "interval": [0.0, 1.0],
                "n_probes": 500,
                "tol": 1e-3,
                "quad_points": 4,
                "catalog": ["smooth-sine", "smooth-exp", "polynomial"],
                "cases": [
                    {"d": 1, "depth": 8, "orders": [2]},
                    {"d": 1, "depth": 8, "orders": [3]},
                    {"d": 2, "depth": 8, "orders": [2, 2]},
                    {"d": 2, "depth": 8, "orders": [3, 3]},
                ],
            },
        }
    if name == "singular":
        return {
            "experiment": "singular",
            "seed": 6006,
            "depth": 10,
            "params": {
                "d": 1,
                "orders": [2],
                "interval": [0.0, 1.0],
                "n_probes": 40,
                "tol": 1e-3,
                "measure": {
                    "density": {"name": "polynomial", "degree": 2, "scale": 1.0},
                    "diracs": [{"location": [0.3], "mass": [1.0]}],
                },
            },
        }
    if name == "nondense":
        return {
            "experiment": "nondense",
            "seed": 7007,
            "depth": 10,
            "params": {
                "interval": [0.0, 1.0],
                "delta_tol": 1e-8,
                "limit_tol": 1e-6,
                "n_probes": 16,
                "cases": [
                    {
                        "d": 1,
                        "depth": 10,
                        "orders": [2],
                        "v_tolerance": 0.25,
                        "rules": [{"name": "frozen-on-subinterval", "frozen": [0.5, 1.0],
                                   "fraction": 0.9}],
                    },
                    {
                        "d": 2,
                        "depth": 10,
                        "sequence_depth": 7,
                        "orders": [2, 2],
                        "v_tolerance": 0.25,
                        "function": "smooth-exp",
                        "rules": [
                            {"name": "frozen-on-subinterval", "frozen": [0.5, 1.0],
                             "fraction": 0.9},
                            {"name": "uniform-bisect-all"},
                        ],
                    },
                ],
            },
        }
    raise ValueError(f"unknown experiment {name!r}; expected one of {EXPERIMENT_NAMES}")


def _format_cell(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_outputs(name: str, cfg: dict, rows, log: AssertionLog, extra: dict,
                  out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{name}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])
    summary = {
        "experiment": name,
        "params": cfg.get("params", {}),
        "seeds": [cfg.get("seed")],
        "depth": cfg.get("depth"),
        "assertions": [a.as_dict() for a in log.items],
        "pass": log.all_pass,
        "findings": extra,
    }
    with open(out / f"{name}.summary.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    meta = {
        "package": "splinelab",
        "version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "config": cfg,
    }
    try:
        import scipy

        meta["scipy"] = scipy.__version__
    except ImportError:  # pragma: no cover
        pass
    with open(out / f"{name}.meta.json", "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed config {path}: line {exc.lineno}: {exc.msg}") from exc
    if "experiment" not in cfg:
        raise ValueError(f"malformed config {path}: missing field 'experiment'")
    if cfg["experiment"] not in EXPERIMENT_NAMES:
        raise ValueError(
            f"malformed config {path}: unknown experiment {cfg['experiment']!r}"
        )
    for fieldname in ("seed", "depth", "params"):
        if fieldname not in cfg:
            raise ValueError(f"malformed config {path}: missing field {fieldname!r}")
    return cfg


def run_experiment(config, out_dir=None, quiet: bool = False) -> int:
    """Run one experiment from a config dict or file path; returns the exit code."""
    if isinstance(config, (str, Path)):
        cfg = load_config(config)
    else:
        cfg = dict(config)
    name = cfg["experiment"]
    rows, log, extra = RUNNERS[name](cfg)
    if out_dir is not None:
        write_outputs(name, cfg, rows, log, extra, out_dir)
    if not quiet:
        for a in log.items:
            status = "PASS" if a.passed else "FAIL"
            print(f"[{status}] {name}: {a.name} (observed {a.observed:.6g}, bound {a.bound:.6g})")
        print(f"{name}: {'all assertions passed' if log.all_pass else 'ASSERTION FAILURES'}")
    return 0 if log.all_pass else 1
