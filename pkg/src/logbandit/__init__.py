"""Logistic-bandit experimentation toolkit.

Optimal designs for logistic models, warmup procedures that certify a
fixed-design confidence region, a phased elimination bandit built on
those designs, and a seeded experiment harness with a CLI.
"""

from .bandit import (
    Environment,
    HomerParams,
    HomerResult,
    HomerState,
    RegretLedger,
    baseline_policy,
    homer_budgets,
    homer_round,
    run_homer,
)
from .core import ArmSet, DesignWeights, fisher_counts, fisher_weighted, mu, mudot
from .design import (
    DesignSolution,
    RoundingPlan,
    away_step_design,
    g_optimal,
    h_optimal,
    mix_designs,
    naive_warmup_design,
    pessimistic_design,
    round_design,
    rounding_floor,
    two_approx_design,
    weighted_g_design,
)
from .errors import (
    BudgetExhausted,
    BudgetTooSmall,
    ConfigError,
    DegenerateDesign,
    DimensionMismatch,
    InvalidDelta,
    LogBanditError,
    LoopCap,
    MaxIterations,
    RankDeficient,
    SchemaError,
    Singular,
)
from .glm import (
    GammaParams,
    MleResult,
    PullLog,
    WarmupCheck,
    exact_bias_1d,
    fit_mle,
    gamma,
    kt_estimate,
    mean_conf_width,
    mle_1d_natural,
    warmup_check,
)
from .harness import (
    ExperimentConfig,
    config_from_dict,
    load_config,
    make_arms,
    run_experiment,
    standard_regret_config,
)
from .warmup import (
    BernsteinTracker,
    ConfidenceSummary,
    SampleBudget,
    WarParams,
    WarmupReport,
    bernstein_width,
    natural_bounds,
    naive_warmup,
    optimistic_mudot,
    oracle_warmup,
    pessimistic_mudot,
    war,
    warmup_sample_count,
)

__version__ = "0.1.0"

__all__ = [
    "ArmSet",
    "BernsteinTracker",
    "BudgetExhausted",
    "BudgetTooSmall",
    "ConfidenceSummary",
    "ConfigError",
    "DegenerateDesign",
    "DesignSolution",
    "DesignWeights",
    "DimensionMismatch",
    "Environment",
    "ExperimentConfig",
    "GammaParams",
    "HomerParams",
    "HomerResult",
    "HomerState",
    "InvalidDelta",
    "LogBanditError",
    "LoopCap",
    "MaxIterations",
    "MleResult",
    "PullLog",
    "RankDeficient",
    "RegretLedger",
    "RoundingPlan",
    "SampleBudget",
    "SchemaError",
    "Singular",
    "WarParams",
    "WarmupCheck",
    "WarmupReport",
    "away_step_design",
    "baseline_policy",
    "bernstein_width",
    "config_from_dict",
    "exact_bias_1d",
    "fisher_counts",
    "fisher_weighted",
    "fit_mle",
    "g_optimal",
    "gamma",
    "h_optimal",
    "homer_budgets",
    "homer_round",
    "kt_estimate",
    "load_config",
    "make_arms",
    "mean_conf_width",
    "mix_designs",
    "mle_1d_natural",
    "mu",
    "mudot",
    "naive_warmup",
    "naive_warmup_design",
    "natural_bounds",
    "optimistic_mudot",
    "oracle_warmup",
    "pessimistic_design",
    "pessimistic_mudot",
    "round_design",
    "rounding_floor",
    "run_experiment",
    "run_homer",
    "standard_regret_config",
    "two_approx_design",
    "war",
    "warmup_check",
    "warmup_sample_count",
    "weighted_g_design",
]
