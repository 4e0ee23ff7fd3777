"""Minimum-error discrimination of bipartite ensembles under PPT measurements."""

__version__ = "0.1.0"

from .operators import (
    BipartiteOperator,
    Spectrum,
    SystemDims,
    ValidationError,
    bell_projector,
    bell_state,
    diag_pair_complement,
    diag_pair_projector,
    identity,
    is_psd,
    load_operator,
    local_pair_identity,
    min_eigenvalue,
    partial_transpose,
    save_operator,
    spectrum,
    state_family,
    tensor,
    trace_inner,
)
from .solver import (
    ConicProgram,
    ConicSolution,
    HermitianProgram,
    SolverError,
    SolverOptions,
    embed_complex,
    solve,
    solve_hermitian,
)
from .cones import (
    ConeCertificate,
    WitnessClass,
    assert_positive_trace,
    check_decomposable,
    check_ppt_plus,
    classify_witness,
)
from .discrimination import (
    DiscriminationResult,
    Ensemble,
    EqualityVerdict,
    GuessingOptimality,
    JointOptimalityReport,
    Measurement,
    WitnessConditionReport,
    check_guessing_optimal,
    classify_equality,
    classify_from_differences,
    evaluate_measurement,
    measurement_witness_check,
    optimal_global,
    optimal_ppt,
    optimal_ppt_dual,
    verify_joint_optimality,
)
from .ensembles import (
    anchored_bell_difference,
    anchored_bell_ensemble,
    bell_mixture_ensemble,
    closed_form_anchored,
    closed_form_bell_mixture,
    ensemble_from_dew,
    ensemble_from_dews,
    equality_threshold_anchored,
    load_ensemble,
    load_measurement,
    orthogonal_triple_dual,
    orthogonal_triple_ensemble,
    save_ensemble,
    save_measurement,
)
