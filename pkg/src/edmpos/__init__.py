"""Distance-matrix consistency checks and closed-form receiver positioning.

Given n anchor positions and n measured pseudoranges, this package decides
whether the measurement is geometrically self-consistent, projects it onto
the nearest consistent squared-range vector, and recovers the receiver
position in closed form.
"""

from .consistency import (
    ConsistencyVerdict,
    Measurement,
    Verdict,
    classify_n4,
    clock_bias_estimate,
    kappa,
    self_consistency_test,
)
from .edm_core import (
    EdmBundle,
    EdmClass,
    SatelliteConfig,
    augmented_edm_check,
    build_edm,
    build_v_basis,
    center_configuration,
    classify_edm,
    edm_from_gram,
    eigen_configuration,
    factor_edm,
    gram_from_edm,
)
from .errors import (
    BadShape,
    DegenerateCoefficient,
    EdmPosError,
    GaleInfeasible,
    GeometryRejection,
    NegativeSquare,
    NoConvergence,
    NotAnEdm,
    PoleEvaluation,
    SingularGeometry,
)
from .harness import (
    BatchSpec,
    BatchStats,
    ConstantBias,
    GaussianSq,
    PipelineOptions,
    Scenario,
    SingleFault,
    apply_noise,
    generate_scenario,
    prepare_scenario,
    run_batch,
    run_pipeline,
)
from .position import PositionFix, ResidualReport, recover_position, verify_fix
from .report import SolveReport
from .solver_general import (
    SecularProblemGen,
    UnconstrainedState,
    build_secular_general,
    eval_f,
    nlp_oracle,
    solve_qcqp,
    solve_unconstrained,
)
from .solver_n4 import SecularProblemN4, build_secular_n4, eval_g, solve_n4

__version__ = "0.1.0"

__all__ = [
    "BadShape",
    "BatchSpec",
    "BatchStats",
    "ConsistencyVerdict",
    "ConstantBias",
    "DegenerateCoefficient",
    "EdmBundle",
    "EdmClass",
    "EdmPosError",
    "GaleInfeasible",
    "GaussianSq",
    "GeometryRejection",
    "Measurement",
    "NegativeSquare",
    "NoConvergence",
    "NotAnEdm",
    "PipelineOptions",
    "PoleEvaluation",
    "PositionFix",
    "ResidualReport",
    "SatelliteConfig",
    "Scenario",
    "SecularProblemGen",
    "SecularProblemN4",
    "SingleFault",
    "SingularGeometry",
    "SolveReport",
    "UnconstrainedState",
    "Verdict",
    "apply_noise",
    "augmented_edm_check",
    "build_edm",
    "build_secular_general",
    "build_secular_n4",
    "build_v_basis",
    "center_configuration",
    "classify_edm",
    "classify_n4",
    "clock_bias_estimate",
    "edm_from_gram",
    "eigen_configuration",
    "eval_f",
    "eval_g",
    "factor_edm",
    "generate_scenario",
    "gram_from_edm",
    "kappa",
    "nlp_oracle",
    "prepare_scenario",
    "recover_position",
    "run_batch",
    "run_pipeline",
    "self_consistency_test",
    "solve_n4",
    "solve_qcqp",
    "solve_unconstrained",
    "verify_fix",
]
