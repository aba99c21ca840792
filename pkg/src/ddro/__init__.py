"""Distributionally robust optimization with decision-dependent ambiguity sets.

Worst-case expectation oracles over five ambiguity families whose parameters
move with the decision, matching dual reformulations with multiplier
certificates, continuous-support semi-infinite reformulations with a
cutting-surface loop, and a derivative-free outer search.
"""

from .errors import (
    AmbiguityEmptyError,
    ConsistencyError,
    DdroError,
    ExprError,
    LpError,
    NonterminationError,
    ParameterError,
    RecourseInfeasibleError,
    SlaterError,
    SpecError,
    ToleranceError,
)
from .expr import evaluate, parse, to_str
from .model import (
    ClosedFormCost,
    DyParams,
    KsParams,
    KscParams,
    PhiParams,
    ProblemSpec,
    RecourseCost,
    ScenarioSet,
    SmParams,
    WParams,
    WcParams,
    cost_eval,
    cost_value,
    validate,
)
from .inner import (
    WorstCase,
    membership_residual,
    wasserstein_distance,
    worst_case,
    worst_case_dy,
    worst_case_ks,
    worst_case_phi,
    worst_case_sm,
    worst_case_w,
)
from .dual import (
    DualCertificate,
    GapReport,
    dual_value,
    dual_value_dy,
    dual_value_ks,
    dual_value_phi,
    dual_value_sm,
    dual_value_w,
    validate_duality,
)
from .sip import (
    IndexBox,
    KSCellGrid,
    SipProblem,
    SipState,
    build_ks_cell_grid,
    build_ks_cont,
    build_phi_sip,
    build_wass_cont,
    ks_cont_value,
    phi_sip_value,
    separation_max,
    solve_sip,
    verify_on_grid,
    wass_cont_value,
)
from .outer import (
    Evaluation,
    SolveOptions,
    SolveReport,
    evaluate as evaluate_decision,
    minimize,
)

__version__ = "0.1.0"
