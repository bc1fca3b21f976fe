"""Simulation of partially deployed BGP path validation on AS graphs."""

from .analysis import (
    CollateralReport, DowngradeReport, MetricReport, RootCause, collateral_report,
    downgrade_report, happy_bounds, metric, plan_steps, root_cause, rollout,
)
from .fixtures import load_fixture
from .partitions import PartitionReport, partition, partition_sweep
from .policy import PolicyModel, SecurityRank, stage_schedule
from .routing_engine import (
    LeadsTo, RouteSummary, RoutingOutcome, Scenario, compute_outcome, compute_outcome_mixed,
)
from .topology import (
    AsGraph, IxpMembership, Relationship, Tier, TierAssignment, augment_with_ixp,
    classify_tiers, load_relationships, parse_relationships, preprocess,
)

__version__ = "0.1.0"

__all__ = [
    "AsGraph", "CollateralReport", "DowngradeReport", "IxpMembership", "LeadsTo", "MetricReport",
    "PartitionReport", "PolicyModel", "Relationship", "RootCause", "RouteSummary",
    "RoutingOutcome", "Scenario", "SecurityRank", "Tier", "TierAssignment", "augment_with_ixp",
    "classify_tiers", "collateral_report", "compute_outcome", "compute_outcome_mixed",
    "downgrade_report", "happy_bounds", "load_fixture", "load_relationships", "metric",
    "parse_relationships", "partition", "partition_sweep", "plan_steps", "preprocess",
    "root_cause", "rollout", "stage_schedule",
]
