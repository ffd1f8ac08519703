"""Nested interval partitions of a box (a,b]^d and their atom lattice.

All atoms are half-open rectangles prod_l (lo_l, hi_l]; a point x belongs to an
atom iff lo < x <= hi componentwise.  A filtration is a sequence of partitions,
one per level, where every breakpoint of level n is also a breakpoint of level
n+1.  All axes are refined in lockstep, so a single level index addresses the
whole tensor grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# refinement never creates an atom thinner than this fraction of |I|
MIN_WIDTH_FRACTION = 1e-9

REFINEMENT_RULES = (
    "uniform-bisect-all",
    "random-atom-bisect",
    "point-targeted",
    "frozen-on-subinterval",
)


@dataclass(frozen=True)
class Interval:
    """Half-open interval (lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"degenerate interval: lo={self.lo} >= hi={self.hi}")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float, closed: bool = False) -> bool:
        if closed:
            return self.lo <= x <= self.hi
        return self.lo < x <= self.hi


@dataclass(frozen=True)
class Rectangle:
    """Axis-parallel half-open rectangle prod_l (lo_l, hi_l]."""

    lo: tuple
    hi: tuple

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    def axis(self, ell: int) -> Interval:
        return Interval(self.lo[ell], self.hi[ell])

    def contains(self, x, closed: bool = False) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        if closed:
            return bool(np.all((lo <= x) & (x <= hi)))
        return bool(np.all((lo < x) & (x <= hi)))


class Partition1D:
    """Finite partition of (a, b] into atoms (t_{j-1}, t_j]."""

    def __init__(self, breakpoints):
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 1 or len(bp) < 2:
            raise ValueError("need at least two breakpoints")
        if not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        bp = bp.copy()
        bp.flags.writeable = False
        self.breakpoints = bp

    @property
    def n_atoms(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def interval(self) -> Interval:
        return Interval(self.breakpoints[0], self.breakpoints[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def atom(self, j: int) -> Interval:
        if not 0 <= j < self.n_atoms:
            raise IndexError(f"atom index {j} out of range [0, {self.n_atoms})")
        return Interval(self.breakpoints[j], self.breakpoints[j + 1])

    def atom_index_of(self, x) -> np.ndarray:
        """Index of the atom containing x under the (lo, hi] convention."""
        x = np.asarray(x, dtype=float)
        bp = self.breakpoints
        if np.any(x <= bp[0]) or np.any(x > bp[-1]):
            raise ValueError(f"point outside ({bp[0]}, {bp[-1]}]")
        # searchsorted 'left': first index with bp[idx] >= x, so atom (bp[idx-1], bp[idx]]
        return np.searchsorted(bp, x, side="left") - 1

    def refines(self, coarser: "Partition1D") -> bool:
        return bool(np.isin(coarser.breakpoints, self.breakpoints).all())

    def parent_map(self, coarser: "Partition1D") -> np.ndarray:
        """For each atom of self, the index of the atom of `coarser` containing it."""
        right = self.breakpoints[1:]
        return np.searchsorted(coarser.breakpoints, right, side="left") - 1

    def __eq__(self, other):
        return isinstance(other, Partition1D) and np.array_equal(
            self.breakpoints, other.breakpoints
        )

    def __repr__(self):
        return f"Partition1D({self.n_atoms} atoms on ({self.breakpoints[0]}, {self.breakpoints[-1]}])"


class Filtration1D:
    """Increasing sequence of partitions of one interval, levels n = 1..N."""

    def __init__(self, levels):
        levels = list(levels)
        if not levels:
            raise ValueError("need at least one level")
        for coarse, fine in zip(levels, levels[1:]):
            if not fine.refines(coarse):
                raise ValueError("levels are not nested")
        self.levels = tuple(levels)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def interval(self) -> Interval:
        return self.levels[0].interval

    def level(self, n: int) -> Partition1D:
        """Partition at level n (1-based, per the usual indexing of filtrations)."""
        if not 1 <= n <= self.n_levels:
            raise ValueError(f"level {n} outside [1, {self.n_levels}]")
        return self.levels[n - 1]


class TensorFiltration:
    """d-fold tensor product of per-axis filtrations, refined in lockstep."""

    def __init__(self, axes):
        axes = tuple(axes)
        if not axes:
            raise ValueError("need at least one axis")
        n = axes[0].n_levels
        if any(ax.n_levels != n for ax in axes):
            raise ValueError("all axes must share the same number of levels")
        self.axes = axes

    @property
    def d(self) -> int:
        return len(self.axes)

    @property
    def n_levels(self) -> int:
        return self.axes[0].n_levels

    @property
    def interval(self) -> Interval:
        return self.axes[0].interval

    def level_shape(self, n: int) -> tuple:
        return tuple(ax.level(n).n_atoms for ax in self.axes)

    def atom_rectangle(self, n: int, index) -> Rectangle:
        los, his = [], []
        for ell, j in enumerate(index):
            iv = self.axes[ell].level(n).atom(int(j))
            los.append(float(iv.lo))
            his.append(float(iv.hi))
        return Rectangle(tuple(los), tuple(his))

    def atom_volumes(self, n: int) -> np.ndarray:
        """Tensor of atom volumes at level n, shape = level_shape(n)."""
        out = np.array(1.0)
        for ax in self.axes:
            w = ax.level(n).widths
            out = np.multiply.outer(out, w)
        return out

    def finest_parent_maps(self, n: int) -> list:
        """Per axis, map from finest-level atom index to level-n atom index."""
        nl = self.n_levels
        return [ax.level(nl).parent_map(ax.level(n)) for ax in self.axes]


@dataclass(frozen=True)
class AtomSet:
    """A set of atom indices at one level."""

    level: int
    members: frozenset

    def __post_init__(self):
        for idx in self.members:
            if not isinstance(idx, tuple):
                raise ValueError("atom indices must be tuples")

    def __len__(self):
        return len(self.members)

    def mask(self, shape) -> np.ndarray:
        out = np.zeros(shape, dtype=bool)
        for idx in self.members:
            out[idx] = True
        return out

    @staticmethod
    def from_mask(level: int, mask: np.ndarray) -> "AtomSet":
        members = frozenset(tuple(int(v) for v in idx) for idx in np.argwhere(mask))
        return AtomSet(level=level, members=members)


# ---------------------------------------------------------------------------
# construction


@dataclass
class FiltrationSpec:
    """Everything needed to build a TensorFiltration reproducibly."""

    d: int
    interval: tuple
    n_levels: int
    rules: list = field(default_factory=lambda: [{"name": "uniform-bisect-all"}])
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.n_levels < 1:
            raise ValueError("n_levels must be >= 1")
        a, b = self.interval
        if not a < b:
            raise ValueError(f"invalid interval: lo={a} >= hi={b}")
        if isinstance(self.rules, dict):
            self.rules = [self.rules]
        if len(self.rules) == 1 and self.d > 1:
            self.rules = [dict(self.rules[0]) for _ in range(self.d)]
        if len(self.rules) != self.d:
            raise ValueError(f"need one rule per axis, got {len(self.rules)} for d={self.d}")
        for rule in self.rules:
            if rule.get("name") not in REFINEMENT_RULES:
                raise ValueError(
                    f"unknown rule {rule.get('name')!r}; expected one of {REFINEMENT_RULES}"
                )

    @staticmethod
    def from_dict(cfg: dict) -> "FiltrationSpec":
        return FiltrationSpec(
            d=int(cfg["d"]),
            interval=tuple(cfg["interval"]),
            n_levels=int(cfg["n_levels"]),
            rules=cfg.get("rules", [{"name": "uniform-bisect-all"}]),
            seed=int(cfg.get("seed", 0)),
        )

    @staticmethod
    def from_config_file(path) -> "FiltrationSpec":
        with open(path) as fh:
            return FiltrationSpec.from_dict(json.load(fh))


def _split_atom(bp_list, j, fraction, floor):
    """Insert a split point into atom j at lo + fraction*width, honoring the width floor."""
    lo, hi = bp_list[j], bp_list[j + 1]
    width = hi - lo
    if width < 2 * floor:
        return None
    point = lo + fraction * width
    point = min(max(point, lo + floor), hi - floor)
    return point


def _base_breakpoints(a, b, rule, rng):
    base_atoms = int(rule.get("base_atoms", 1))
    jitter = float(rule.get("base_jitter", 0.0))
    if base_atoms < 1:
        raise ValueError("base_atoms must be >= 1")
    if not 0.0 <= jitter < 1.0:
        raise ValueError("base_jitter must lie in [0, 1)")
    if rule["name"] == "frozen-on-subinterval":
        flo, fhi = rule["frozen"]
        if not (a <= flo < fhi <= b):
            raise ValueError(f"frozen interval ({flo}, {fhi}] not inside ({a}, {b}]")
        pts = sorted({a, flo, fhi, b})
        return np.array(pts, dtype=float)
    if jitter > 0.0:
        w = 1.0 + jitter * (2.0 * rng.random(base_atoms) - 1.0)
        bp = np.concatenate([[0.0], np.cumsum(w)]) / w.sum()
        return a + (b - a) * bp
    return np.linspace(a, b, base_atoms + 1)


def _refine_once(bp, rule, rng, floor):
    """One refinement step; returns the new breakpoint array."""
    name = rule["name"]
    widths = np.diff(bp)
    new_points = []
    if name == "uniform-bisect-all":
        for j in range(len(widths)):
            p = _split_atom(bp, j, 0.5, floor)
            if p is not None:
                new_points.append(p)
    elif name == "random-atom-bisect":
        p_split = float(rule.get("p_split", 0.7))
        lo_f, hi_f = rule.get("split_range", (0.5, 0.5))
        chosen = rng.random(len(widths)) < p_split
        if not chosen.any():
            chosen[int(np.argmax(widths))] = True
        fracs = lo_f + (hi_f - lo_f) * rng.random(len(widths))
        for j in np.flatnonzero(chosen):
            p = _split_atom(bp, j, fracs[j], floor)
            if p is not None:
                new_points.append(p)
    elif name == "point-targeted":
        target = float(rule["target"])
        fraction = float(rule.get("fraction", 0.5))
        j = int(np.searchsorted(bp, target, side="left")) - 1
        j = min(max(j, 0), len(widths) - 1)
        p = _split_atom(bp, j, fraction, floor)
        if p is not None:
            new_points.append(p)
    elif name == "frozen-on-subinterval":
        flo, fhi = rule["frozen"]
        fraction = float(rule.get("fraction", 0.5))
        for j in range(len(widths)):
            if bp[j] >= flo and bp[j + 1] <= fhi:
                continue
            p = _split_atom(bp, j, fraction, floor)
            if p is not None:
                new_points.append(p)
    else:  # pragma: no cover - guarded by FiltrationSpec
        raise ValueError(f"unknown rule {name!r}")
    if not new_points:
        return bp.copy()
    return np.sort(np.concatenate([bp, np.array(new_points)]))


def build_filtration(spec: FiltrationSpec) -> TensorFiltration:
    """Build the tensor filtration described by `spec`; deterministic given spec.seed."""
    a, b = float(spec.interval[0]), float(spec.interval[1])
    floor = MIN_WIDTH_FRACTION * (b - a)
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.d)
    axes = []
    for ell in range(spec.d):
        rng = np.random.default_rng(seeds[ell])
        rule = spec.rules[ell]
        bp = _base_breakpoints(a, b, rule, rng)
        levels = []
        for _ in range(spec.n_levels):
            bp = _refine_once(bp, rule, rng, floor)
            levels.append(Partition1D(bp))
        axes.append(Filtration1D(levels))
    return TensorFiltration(axes)


# ---------------------------------------------------------------------------
# queries


def atom_of(F: TensorFiltration, n: int, x):
    """The unique level-n atom containing x; returns (index tuple, Rectangle)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (F.d,):
        raise ValueError(f"point has wrong dimension: {x.shape} vs d={F.d}")
    index = tuple(int(F.axes[ell].level(n).atom_index_of(x[ell])) for ell in range(F.d))
    return index, F.atom_rectangle(n, index)


def atom_distance(F: TensorFiltration, n: int, i, j) -> int:
    """l1 distance between atom indices at level n."""
    i = tuple(int(v) for v in i)
    j = tuple(int(v) for v in j)
    shape = F.level_shape(n)
    for idx in (i, j):
        if len(idx) != F.d or any(not 0 <= v < s for v, s in zip(idx, shape)):
            raise IndexError(f"atom index {idx} out of range for level shape {shape}")
    return int(sum(abs(a - b) for a, b in zip(i, j)))


def neighborhood(F: TensorFiltration, n: int, seed, s: int) -> AtomSet:
    """All level-n atoms within l1 index distance s of the seed.

    The seed may be a point of I^d, a single atom index tuple, or an AtomSet
    at level n.  Monotone in s by construction.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    shape = F.level_shape(n)
    if isinstance(seed, AtomSet):
        if seed.level != n:
            raise ValueError(f"seed AtomSet at level {seed.level}, expected {n}")
        seeds = list(seed.members)
    elif isinstance(seed, tuple) and all(isinstance(v, (int, np.integer)) for v in seed):
        seeds = [tuple(int(v) for v in seed)]
    else:
        index, _ = atom_of(F, n, seed)
        seeds = [index]
    dist = l1_distance_grid(shape, seeds)
    return AtomSet.from_mask(n, dist <= s)


def l1_distance_grid(shape, seeds) -> np.ndarray:
    """Tensor of l1 index distances to the nearest seed index (multi-source)."""
    big = int(np.sum(shape)) + 1
    dist = np.full(shape, big, dtype=np.int64)
    for idx in seeds:
        dist[tuple(idx)] = 0
    # two-pass min-plus transform per axis computes the exact separable l1 distance
    for ax in range(len(shape)):
        dist = np.ascontiguousarray(np.moveaxis(dist, ax, 0))
        flat = dist.reshape(dist.shape[0], -1)
        for p in range(1, flat.shape[0]):
            np.minimum(flat[p], flat[p - 1] + 1, out=flat[p])
        for p in range(flat.shape[0] - 2, -1, -1):
            np.minimum(flat[p], flat[p + 1] + 1, out=flat[p])
        dist = np.moveaxis(dist, 0, ax)
    return np.ascontiguousarray(dist)


def check_nested(F: TensorFiltration):
    """Verify breakpoint nestedness level by level.

    Returns (True, None) or (False, description of the first violation).
    """
    for ell, ax in enumerate(F.axes):
        for n in range(1, ax.n_levels):
            coarse = ax.levels[n - 1].breakpoints
            fine = ax.levels[n].breakpoints
            present = np.isin(coarse, fine)
            if not present.all():
                missing = coarse[~present][0]
                return False, (
                    f"axis {ell + 1}, level {n + 1}: breakpoint {missing} of level {n} missing"
                )
    return True, None


# ---------------------------------------------------------------------------
# serialization


def filtration_to_json(F: TensorFiltration) -> str:
    doc = {
        "d": F.d,
        "interval": [F.interval.lo, F.interval.hi],
        "n_levels": F.n_levels,
        "axes": [
            {"levels": [level.breakpoints.tolist() for level in ax.levels]}
            for ax in F.axes
        ],
    }
    return json.dumps(doc, sort_keys=True)


def filtration_from_json(text: str) -> TensorFiltration:
    doc = json.loads(text)
    axes = []
    for ax in doc["axes"]:
        axes.append(Filtration1D([Partition1D(bp) for bp in ax["levels"]]))
    return TensorFiltration(axes)
