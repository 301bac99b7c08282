"""Tsirelson polytopes in the (2,2,2) Bell scenario and PEF-based randomness certification."""

__version__ = "0.1.0"

from tsirelson.bell import (
    Behavior,
    BellFunctional,
    BoundsSummary,
    chsh_functional,
    chsh_version,
    classify_top_bottom,
    compute_bounds,
    evaluate,
    local_deterministic,
    pr_box,
    saturating_locals,
    tilted_functional,
)
from tsirelson.errors import (
    ConstraintViolated,
    DegenerateFunctional,
    InvalidBehavior,
    MaxIterations,
    NotInPolytope,
    NumericalBreakdown,
    SolverError,
    TsirelsonError,
)
from tsirelson.pef import (
    CertificationConfig,
    CertificationReport,
    Pef,
    bits_from_expected_log,
    constraint_value,
    expected_log,
    is_valid_pef,
    optimize_pef,
    sweep_alpha,
    sweep_beta,
)
from tsirelson.polytope import (
    DecompositionWeights,
    PolytopeModel,
    TsirelsonConstraint,
    decompose,
    double_bound_extremes,
    eight_chsh_polytope,
    single_bound_extremes,
    verify_extremality,
)
from tsirelson.scenarios import (
    SettingsDistribution,
    TrialDistribution,
    mix,
    qubit_behavior,
    tilted_maximizer,
)
