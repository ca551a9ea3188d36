"""Online uniform sampling: budget-feasible probability schedulers for an
unknown number of risk times, with a seeded Monte Carlo verification harness."""

from .algorithms import (
    IntervalPolicy,
    OnlinePolicy,
    PolicyState,
    RandomizedPolicy,
    Regime,
    augmented_init,
    augmented_next,
    randomized_init,
    randomized_next,
    run_multi_level,
    run_policy,
)
from .baselines import ConstantPolicy, SeqRTSConfig, SeqRTSPolicy, constant_policy, seqrts_policy
from .core import (
    E,
    MonteCarloEstimate,
    ObjectiveReport,
    PredictionInterval,
    ProbabilityAssignment,
    ProblemSpec,
    RngStream,
    evaluate_objective,
    randomized_round,
    sample_alpha,
    score_with_sentinel,
    theoretical_cr_learn,
    theoretical_cr_rand,
)
from .harness import (
    ScenarioConfig,
    SweepRow,
    TauRule,
    export_csv,
    load_config,
    run_budget_audit,
    run_scenario,
    run_tau_sweep,
    run_width_sweep,
)

__all__ = [
    "E",
    "ConstantPolicy",
    "IntervalPolicy",
    "MonteCarloEstimate",
    "ObjectiveReport",
    "OnlinePolicy",
    "PolicyState",
    "PredictionInterval",
    "ProbabilityAssignment",
    "ProblemSpec",
    "RandomizedPolicy",
    "Regime",
    "RngStream",
    "ScenarioConfig",
    "SeqRTSConfig",
    "SeqRTSPolicy",
    "SweepRow",
    "TauRule",
    "augmented_init",
    "augmented_next",
    "constant_policy",
    "evaluate_objective",
    "export_csv",
    "load_config",
    "randomized_init",
    "randomized_next",
    "randomized_round",
    "run_budget_audit",
    "run_multi_level",
    "run_policy",
    "run_scenario",
    "run_tau_sweep",
    "run_width_sweep",
    "sample_alpha",
    "score_with_sentinel",
    "seqrts_policy",
    "theoretical_cr_learn",
    "theoretical_cr_rand",
]

__version__ = "0.1.0"
