"""Sample-complexity planning and sequential probabilistic validation."""

from .binomial import TailQuery, TailValue, binom_tail, lemma1_bound, min_samples_exact
from .complexity import (
    Bound,
    PlanResult,
    RiskSpec,
    phi,
    plan_bound,
    plan_euler,
    plan_exact,
    plan_finite,
    plan_lemma2,
    plan_optimal_a,
    plan_scenario,
    plan_sqrt,
    plan_suboptimal_a,
    plan_worstcase,
    riemann_zeta,
    strict_failure_bound,
)
from .lp import LinearProgram, LpSolution, Status, solve_lp
from .spv import SpvConfig, SpvSchedule, SpvTrace, cardinality, run_spv

__version__ = "0.1.0"

__all__ = [
    "Bound",
    "LinearProgram",
    "LpSolution",
    "PlanResult",
    "RiskSpec",
    "SpvConfig",
    "SpvSchedule",
    "SpvTrace",
    "Status",
    "TailQuery",
    "TailValue",
    "binom_tail",
    "cardinality",
    "lemma1_bound",
    "min_samples_exact",
    "phi",
    "plan_bound",
    "plan_euler",
    "plan_exact",
    "plan_finite",
    "plan_lemma2",
    "plan_optimal_a",
    "plan_scenario",
    "plan_sqrt",
    "plan_suboptimal_a",
    "plan_worstcase",
    "riemann_zeta",
    "run_spv",
    "solve_lp",
    "strict_failure_bound",
]
