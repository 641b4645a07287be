"""Budgeted multi-cloud storage placement: provider selection, chunk replication,
privacy fragmentation and Monte Carlo checks."""

from cloudplace.catalog import Catalog, PricingSchedule, Provider, load_catalog, log_value
from cloudplace.chunkplan import ChunkAssignment, ChunkSpec, expected_value, solve_max_expected_value
from cloudplace.costmodel import CANONICAL_WORKLOAD, WorkloadProfile, monthly_cost
from cloudplace.maxavail import AvailabilityPlan, availability_from_value, solve_max_availability

__all__ = [
    "CANONICAL_WORKLOAD",
    "AvailabilityPlan",
    "Catalog",
    "ChunkAssignment",
    "ChunkSpec",
    "PricingSchedule",
    "Provider",
    "WorkloadProfile",
    "availability_from_value",
    "expected_value",
    "load_catalog",
    "log_value",
    "monthly_cost",
    "solve_max_availability",
    "solve_max_expected_value",
]
