"""splinelab: tensor-product spline orthoprojectors on nested interval filtrations.

Builds arbitrary nested partitions of a box (a, b]^d, the clamped B-spline
spaces over them, and the L2 orthoprojectors in Kronecker form, then measures
the quantitative behavior that drives martingale-style convergence: geometric
decay of the dual basis, uniform L1 boundedness, weak-type (1,1) inequalities
for the intrinsic maximal operator with explicit constants, and pointwise
limits of martingale spline sequences, including measures with Dirac parts
and filtrations that stop refining.
"""

__version__ = "0.1.0"

from .bspline import (
    KnotVector,
    QuadratureRule,
    Spline1D,
    SplineSpace1D,
    TensorSpline,
    atom_quadrature,
    eval_tensor_spline,
    integrate_against,
    knot_vector,
)
from .filtration import (
    AtomSet,
    Filtration1D,
    FiltrationSpec,
    Interval,
    Partition1D,
    Rectangle,
    TensorFiltration,
    atom_distance,
    atom_of,
    build_filtration,
    check_nested,
    filtration_from_json,
    filtration_to_json,
    neighborhood,
)
from .maximal import (
    MaximalField,
    WeakTypeReport,
    b_term,
    covering_constant,
    covering_series_bound,
    hl_maximal,
    level_sum,
    maximal_field,
    restricted_limsup_bound,
    superlevel_measure,
    verify_covering_bound,
    weak_series_total,
)
from .measures import (
    HybridMeasure,
    MeasureValue,
    compile_masses,
    density_catalog,
    lebesgue_parts,
    measure_of_atom,
    scalar_variation,
    total_variation,
)
from .nondense import (
    LimitDualTable,
    VSetReport,
    detect_v_sets,
    frozen_subspace,
    limit_dual_table,
)
from .projector import (
    DecayProfile,
    GramSystem,
    TensorProjector,
    decay_profile,
    dual_eval,
    gram,
    operator_norm_inf,
)
from .sequences import (
    ConvergenceProbe,
    MartingaleSplineSequence,
    convergence_probe,
    make_sequence,
    sample_probe_points,
    verify_martingale_property,
)
