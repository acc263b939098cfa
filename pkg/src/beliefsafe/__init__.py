"""beliefsafe: safe and exploitative play against opponents of uncertain type.

Computes maximin, best-response and trust-blended strategies in normal-form
and stochastic Bayesian games, evaluates the resulting opportunity/risk
tradeoff exactly or empirically, and checks results against closed-form
bound envelopes.
"""

from .normal_form import (
    Belief,
    GameStats,
    GapPoint,
    GapReport,
    HypothesisSet,
    LambdaPolicy,
    MixedStrategy,
    PayoffMatrix,
    TypeIntensityUndefinedError,
    best_response,
    expected_payoff,
    full_simplex_for_game,
    lambda_policy,
    load_nfg_game,
    opportunity_risk_nfg,
    payoff_gap_nfg,
    save_nfg_game,
    theta_stats,
)
from .linprog import (
    LinearProgram,
    LpError,
    LpInfeasibleError,
    LpIterationLimitError,
    LpSolution,
    LpUnboundedError,
    MaximinResult,
    maximin_strategy,
    solve_lp,
)
from .envelopes import (
    NfgEnvelope,
    SbgEnvelope,
    adversarial_matrix,
    nfg_envelope,
    nfg_lower_bound,
    nfg_upper_bound,
    sbg_constants,
    sbg_envelopes,
)
from .stochastic import (
    AgentPolicy,
    EpisodeResult,
    GameValueResult,
    SbgGapReport,
    SimAgent,
    StationaryAgent,
    StochasticGame,
    StrategyKernel,
    blend_policy,
    game_value_sbg,
    load_sbg_game,
    opportunity_risk_sbg,
    optimal_value,
    payoff_gap_sbg,
    policy_evaluation,
    r_matrix,
    safe_exploit_policy,
    save_sbg_game,
    simulate_episode,
    single_state_game,
)

__version__ = "0.1.0"

__all__ = [
    "AgentPolicy",
    "Belief",
    "EpisodeResult",
    "GameStats",
    "GameValueResult",
    "GapPoint",
    "GapReport",
    "HypothesisSet",
    "LambdaPolicy",
    "LinearProgram",
    "LpError",
    "LpInfeasibleError",
    "LpIterationLimitError",
    "LpSolution",
    "LpUnboundedError",
    "MaximinResult",
    "MixedStrategy",
    "NfgEnvelope",
    "PayoffMatrix",
    "SbgEnvelope",
    "SbgGapReport",
    "SimAgent",
    "StationaryAgent",
    "StochasticGame",
    "StrategyKernel",
    "TypeIntensityUndefinedError",
    "adversarial_matrix",
    "best_response",
    "blend_policy",
    "expected_payoff",
    "full_simplex_for_game",
    "game_value_sbg",
    "lambda_policy",
    "load_nfg_game",
    "load_sbg_game",
    "maximin_strategy",
    "nfg_envelope",
    "nfg_lower_bound",
    "nfg_upper_bound",
    "opportunity_risk_nfg",
    "opportunity_risk_sbg",
    "optimal_value",
    "payoff_gap_nfg",
    "payoff_gap_sbg",
    "policy_evaluation",
    "r_matrix",
    "safe_exploit_policy",
    "save_nfg_game",
    "save_sbg_game",
    "sbg_constants",
    "sbg_envelopes",
    "simulate_episode",
    "single_state_game",
    "solve_lp",
    "theta_stats",
]
