"""Matrix-free sparse recovery via conjugate-gradient accelerated IRLS.

The package provides two iteratively re-weighted least squares families
(equality-constrained and Lagrangian), Krylov solvers with pluggable
stopping rules, a fast partial-DCT measurement operator, IHT and FISTA
baselines, synthetic problem generation, and a benchmark harness.
"""

__version__ = "0.1.0"

from .operators import (
    DenseOperator,
    DiagonalScaledOperator,
    LinearOperator,
    PartialDCTOperator,
    dct_full_entry,
    estimate_extremal_singular_values,
    make_partial_dct,
    operator_from_spec,
    operator_spec,
)
from .vectors import (
    WeightedVector,
    best_k_term_error,
    nonincreasing_rearrangement,
    weighted_norm,
)
from .krylov import (
    KrylovError,
    KrylovReport,
    MCGIteration,
    StopPredicate,
    cg_solve,
    mcg_solve,
    pcg_solve,
)
from .functionals import (
    SummableSequence,
    WeightState,
    critical_point_residual_tau,
    f_eps_tau,
    j_tau,
    j_tau_lambda,
    lasso_optimality_residual,
    objective_F,
    power_transform,
    power_transform_inverse,
    update_epsilon_objective,
    update_epsilon_rank,
    update_weights,
)
from .trace import SolveTrace, TraceRecord
from .equality import (
    EqualityConfig,
    cg_irls,
    cg_irls_modified,
    cn_wbar,
    irls_exact,
    mcg_residual_threshold,
    tol_schedule,
)
from .lagrangian import (
    LagrangianConfig,
    cg_irls_lambda,
    cg_residual_threshold_lambda,
    irls_lambda_exact,
    tol_schedule_lambda,
)
from .baselines import fista, hard_threshold, iht, soft_threshold
from .problems import (
    SETTINGS,
    ProblemInstance,
    SettingPreset,
    generate_instance,
    lambda_heuristic,
    noise_sigma,
)
from .bench import (
    PhaseGrid,
    SpeedReport,
    TrialResult,
    run_phase_transition,
    run_solver,
    run_speed_test,
)
