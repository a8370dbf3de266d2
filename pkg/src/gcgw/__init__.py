"""Affinity-structured branching model of germinal-center maturation.

The package has four layers:

* :mod:`gcgw.kernel` -- mutation kernels over affinity classes, their
  validation, spectral decomposition and stationary distribution;
* :mod:`gcgw.singletype` -- the scalar branching process for the total
  center size, with closed-form growth and extinction results;
* :mod:`gcgw.meanfield` -- block mean matrices of the multi-type process
  and every exact expectation, spectral bound and extinction solver;
* :mod:`gcgw.simulate` -- the seedable cell-level simulator with ensemble
  statistics, validated against the analytic layer.

:mod:`gcgw.cli` exposes all of it as a batch command-line tool.
"""
from .errors import ConvergenceError, DecompositionError, PopulationCapError
from .kernel import (
    KernelValidation,
    MutationKernel,
    SpectralDecomposition,
    build_point_mutation_kernel,
    eigendecompose,
    load_kernel_csv,
    sample_class_transition,
    save_kernel_csv,
    stationary_distribution,
    validate_kernel,
)
from .meanfield import (
    ExpectationReport,
    ExtinctionClassification,
    InitialState,
    MeanMatrices,
    SpectralBounds,
    build_mean_matrix,
    build_preselection_matrix,
    closed_form_expected_selected,
    closed_form_gc_affinity,
    empirical_optimal_selection_rate,
    expectation_report,
    expected_state_at,
    extinction_classification,
    heuristic_selected_estimate,
    multitype_extinction_probability,
    optimal_selection_rate,
    scheduled_expected_state,
    single_clone_state,
    spectral_bounds,
    state_from_gc_counts,
)
from .params import (
    MODES,
    NEGATIVE_ONLY,
    POSITIVE_NEGATIVE,
    POSITIVE_ONLY,
    ModelParams,
    validate_schedule,
)
from .simulate import (
    EnsembleStats,
    PopulationState,
    RunConfig,
    StepDetail,
    Trajectory,
    empirical_extinction_curve,
    run_ensemble,
    run_trajectory,
    step_generation,
    step_generation_detailed,
)
from .singletype import (
    OffspringDistribution,
    critical_selection_rate,
    expected_gc_size,
    extinction_probability,
    growth_factor,
    offspring_distribution,
    pgf_eval,
    preselection_growth_factor,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DecompositionError",
    "PopulationCapError",
    "KernelValidation",
    "MutationKernel",
    "SpectralDecomposition",
    "build_point_mutation_kernel",
    "eigendecompose",
    "load_kernel_csv",
    "sample_class_transition",
    "save_kernel_csv",
    "stationary_distribution",
    "validate_kernel",
    "ExpectationReport",
    "ExtinctionClassification",
    "InitialState",
    "MeanMatrices",
    "SpectralBounds",
    "build_mean_matrix",
    "build_preselection_matrix",
    "closed_form_expected_selected",
    "closed_form_gc_affinity",
    "empirical_optimal_selection_rate",
    "expectation_report",
    "expected_state_at",
    "extinction_classification",
    "heuristic_selected_estimate",
    "multitype_extinction_probability",
    "optimal_selection_rate",
    "scheduled_expected_state",
    "single_clone_state",
    "spectral_bounds",
    "state_from_gc_counts",
    "MODES",
    "NEGATIVE_ONLY",
    "POSITIVE_NEGATIVE",
    "POSITIVE_ONLY",
    "ModelParams",
    "validate_schedule",
    "EnsembleStats",
    "PopulationState",
    "RunConfig",
    "StepDetail",
    "Trajectory",
    "empirical_extinction_curve",
    "run_ensemble",
    "run_trajectory",
    "step_generation",
    "step_generation_detailed",
    "OffspringDistribution",
    "critical_selection_rate",
    "expected_gc_size",
    "extinction_probability",
    "growth_factor",
    "offspring_distribution",
    "pgf_eval",
    "preselection_growth_factor",
    "__version__",
]
