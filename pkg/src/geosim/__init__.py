"""Agent-based simulation of validator geography under two block-building
paradigms, with latency-calibrated release timing and migration dynamics."""

from .attestation import (
    Committee,
    LogNormalParams,
    canonical_prob,
    lognormal_sum_params,
    poisson_binomial_tail,
    required_votes,
    timely_prob_msp,
    timely_prob_ssp,
)
from .engine import (
    LatencyConfig,
    ScenarioConfig,
    SimulationResult,
    SlotOutcome,
    SourceSpec,
    ValidatorState,
    init_population,
    run_scenario,
)
from .metrics import MetricsSnapshot, gini, hhi, liveness_coefficient, payoff_cv, snapshot
from .presets import expand_preset
from .sources import InfoSource, SourceKind, aggregate_value_msp, relay_effective_bid
from .strategy import (
    MSP,
    SSP,
    ConsensusParams,
    MigrationDecision,
    ReleasePlan,
    SlotEvaluator,
    colocate_ssp,
    migrate_msp,
    optimal_release_msp,
    optimal_release_ssp,
    payoff_msp,
)
from .topology import (
    LatencyModel,
    Macro,
    Region,
    RegionTable,
    load_latency_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "Committee",
    "ConsensusParams",
    "InfoSource",
    "LatencyConfig",
    "LatencyModel",
    "LogNormalParams",
    "Macro",
    "MetricsSnapshot",
    "MigrationDecision",
    "MSP",
    "Region",
    "RegionTable",
    "ReleasePlan",
    "ScenarioConfig",
    "SimulationResult",
    "SlotEvaluator",
    "SlotOutcome",
    "SourceKind",
    "SourceSpec",
    "SSP",
    "ValidatorState",
    "aggregate_value_msp",
    "canonical_prob",
    "colocate_ssp",
    "expand_preset",
    "gini",
    "hhi",
    "init_population",
    "liveness_coefficient",
    "load_latency_dataset",
    "lognormal_sum_params",
    "migrate_msp",
    "optimal_release_msp",
    "optimal_release_ssp",
    "payoff_cv",
    "payoff_msp",
    "poisson_binomial_tail",
    "relay_effective_bid",
    "required_votes",
    "run_scenario",
    "snapshot",
    "timely_prob_msp",
    "timely_prob_ssp",
]
