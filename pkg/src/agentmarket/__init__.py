"""agentmarket: a deterministic agent-marketplace simulator and auction engine.

Pipeline: infer agent capability vectors from tool descriptions, allocate
task subtasks to agents under one of five mechanisms, execute the
assignment stochastically under a market condition, attribute the produced
value with Shapley shares, and settle payments through a second-price
exchange. The experiments module sweeps the full factorial grid and runs
the statistical comparison.
"""

from .allocation import (
    ALGORITHMS,
    Assignment,
    AttributeWeights,
    TeamSelection,
    allocate_capability_first,
    allocate_cost_optimal,
    allocate_enhanced_auction,
    allocate_greedy,
    allocate_random,
    composite_score,
    select_team,
)
from .attribution import (
    AttributionResult,
    CoalitionGame,
    check_cost_bound,
    outcome_game,
    shapley_exact,
    shapley_monte_carlo,
    surplus,
)
from .capability import capability_match, capability_strength, infer_profile, tokenize
from .domain import (
    AgentProfile,
    CapabilityTaxonomy,
    MarketCondition,
    SubtaskSpec,
    TaskSpec,
    ToolDescriptor,
    effective_unit_cost,
    liquidity,
    load_agents,
    load_markets,
    load_task,
    load_tasks,
    load_taxonomy,
    money,
    task_violations,
    validate_task,
)
from .exchange import (
    AuctionRound,
    Bid,
    Hub,
    SettlementRecord,
    TaskAnnouncement,
    configuration_of,
    qualify,
    run_exchange,
    run_hub_auction,
    select_mechanism,
    settle,
)
from .execsim import (
    RandomStream,
    SubtaskOutcome,
    TrialOutcome,
    execute_trial,
    quality_outcome,
    success_probability,
)
from .experiments import (
    ExperimentPlan,
    MethodSummary,
    StatsReport,
    anova_oneway,
    build_stats_report,
    run_plan,
    summarize,
    welch_t_and_d,
)

__version__ = "0.1.0"
