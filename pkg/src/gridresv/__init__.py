"""Advance-reservation task scheduling for grid nodes.

A broker fans task batches out to agents; each agent prices every task
against a cloned copy of its per-node reservation timelines and sends back
offers.  The broker keeps the cheapest offer per task, breaking ties toward
the less-loaded agent, and the winners commit their reservations for real.
"""

from .model import (
    DEFAULT_MAX_LOAD,
    DEFAULT_MAX_TASKS,
    INFINITE,
    DuplicateTaskError,
    DynamicTable,
    Feasibility,
    InfeasibleError,
    Interval,
    NodeSpec,
    ResourceTimeline,
    SchedulerError,
    SchedulerLimits,
    Task,
    Violation,
    new_timeline,
)
from .agent import Agent, AgentMetrics, NodeMetrics, Offer
from .broker import FinalSchedule, OfferRecord, RoundResult, fold_offers, run_round
from .reporting import CommTiming, format_percent, performance_indicator
from .scenario import ScenarioSpec, generate_scenario
from .simulate import SimulationOutcome, run_simulation

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "AgentMetrics",
    "CommTiming",
    "DEFAULT_MAX_LOAD",
    "DEFAULT_MAX_TASKS",
    "DuplicateTaskError",
    "DynamicTable",
    "Feasibility",
    "FinalSchedule",
    "INFINITE",
    "InfeasibleError",
    "Interval",
    "NodeMetrics",
    "NodeSpec",
    "Offer",
    "OfferRecord",
    "ResourceTimeline",
    "RoundResult",
    "ScenarioSpec",
    "SchedulerError",
    "SchedulerLimits",
    "SimulationOutcome",
    "Task",
    "Violation",
    "fold_offers",
    "format_percent",
    "generate_scenario",
    "new_timeline",
    "performance_indicator",
    "run_round",
    "run_simulation",
    "__version__",
]
