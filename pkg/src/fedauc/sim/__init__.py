"""Multi-party simulation: roles, message bus, cost accounting and scenarios."""

from fedauc.sim.bus import AGGREGATOR, CostReport, MessageBus, Transcript, TranscriptEntry, client_role
from fedauc.sim.roles import SETUP_MARKER, AggregatorKeys, PartyDescriptor, PartyRegistry, TrustedSetup, trusted_setup
from fedauc.sim.runner import (
    PROTOCOLS,
    RESULT_COLUMNS,
    ScenarioConfig,
    ScenarioResult,
    expand_grid,
    load_configs,
    parse_config_text,
    run_scenario,
    sweep,
)

__all__ = [
    "AGGREGATOR", "CostReport", "MessageBus", "Transcript", "TranscriptEntry", "client_role",
    "SETUP_MARKER", "AggregatorKeys", "PartyDescriptor", "PartyRegistry", "TrustedSetup", "trusted_setup",
    "PROTOCOLS", "RESULT_COLUMNS", "ScenarioConfig", "ScenarioResult", "expand_grid", "load_configs",
    "parse_config_text", "run_scenario", "sweep",
]
