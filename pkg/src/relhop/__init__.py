"""Numerical laboratory for classical and relativistic Hopfield networks.

Low-storage regime only (P patterns, P << N neurons): Monte Carlo spin
dynamics, mean-field self-consistency and free energies, and exact-enumeration
checks of sub-additivity, interpolation monotonicity and the critical point
at beta = 1.
"""

__version__ = "0.1.0"

from .model import (
    CLASSICAL,
    RELATIVISTIC,
    ModelKind,
    PatternSet,
    SpinState,
    apply_flip,
    delta_energy,
    energy,
    energy_from_overlaps,
    load_patterns,
    mattis_overlaps,
    parse_kind,
    save_patterns,
    truncated,
)
from .dynamics import (
    DynamicsConfig,
    InitSpec,
    RescaledFluctuation,
    TrajectoryStats,
    corrupted_init,
    measure_overlap_curve,
    overlap_fluctuations,
    pattern_init,
    random_init,
    retrieval_frequency,
    run_trajectory,
    sample_patterns,
    sweep,
)
from .meanfield import (
    CriticalScan,
    FixedPointResult,
    SelfConsistencyProblem,
    critical_scan,
    effective_field,
    fluctuation_theory,
    free_energy_classical,
    free_energy_relativistic,
    rhs_classical,
    rhs_relativistic,
    solve_fixed_point,
    xi_expectation,
)
from .verification import (
    InterpolationReport,
    SplitSpec,
    SubadditivityReport,
    check_fluctuation_interpolation,
    check_sqrt_convexity,
    check_subadditivity,
    check_t_monotonicity,
    convexity_gap,
    exact_log_partition,
    interpolating_alpha,
    quenched_free_energy,
)

__all__ = [name for name in dir() if not name.startswith("_")]
