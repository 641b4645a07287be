"""Monthly storage cost under graduated (marginal) tier pricing."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from cloudplace.catalog import PricingSchedule

GB_PER_TB = 1024


@dataclass(frozen=True)
class WorkloadProfile:
    storage_gb_month: float = 0.0
    egress_gb_month: float = 0.0
    put_requests_month: float = 0
    get_requests_month: float = 0

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"workload {name} must be >= 0, got {value}")

    def scaled(self, factor: float) -> WorkloadProfile:
        return WorkloadProfile(
            self.storage_gb_month * factor,
            self.egress_gb_month * factor,
            self.put_requests_month * factor,
            self.get_requests_month * factor,
        )

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> WorkloadProfile:
        return cls(
            storage_gb_month=float(data.get("storage_gb_month", 0.0)),
            egress_gb_month=float(data.get("egress_gb_month", 0.0)),
            put_requests_month=data.get("put_requests_month", 0),
            get_requests_month=data.get("get_requests_month", 0),
        )

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


# 51.66 TB stored, 2 TB/day egress, 1000 PUT/day and 20000 GET/day over a 31-day month.
CANONICAL_WORKLOAD = WorkloadProfile(
    storage_gb_month=51.66 * GB_PER_TB,
    egress_gb_month=2 * GB_PER_TB * 31,
    put_requests_month=1000 * 31,
    get_requests_month=20000 * 31,
)


def load_workload(path: str | Path) -> WorkloadProfile:
    return WorkloadProfile.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class CostBreakdown:
    storage_usd: float
    egress_usd: float
    put_usd: float
    get_usd: float

    @property
    def total_usd(self) -> float:
        return self.storage_usd + self.egress_usd + self.put_usd + self.get_usd

    def to_dict(self) -> dict[str, float]:
        return {**asdict(self), "total_usd": self.total_usd}


def tiered_cost(volume_gb: float, tiers: Sequence[tuple[float, float]]) -> float:
    """Charge each tier's rate only on the volume inside that tier."""
    total = 0.0
    remaining = volume_gb
    last = len(tiers) - 1
    for i, (capacity, price) in enumerate(tiers):
        if remaining <= 0:
            break
        used = remaining if i == last else min(remaining, capacity)
        total += used * price
        remaining -= used
    return total


def monthly_cost(schedule: PricingSchedule, workload: WorkloadProfile) -> CostBreakdown:
    return CostBreakdown(
        storage_usd=tiered_cost(workload.storage_gb_month, schedule.storage_tiers),
        egress_usd=tiered_cost(workload.egress_gb_month, schedule.egress_tiers),
        put_usd=workload.put_requests_month / 1000 * schedule.put_price_per_1000_usd,
        get_usd=workload.get_requests_month / 10000 * schedule.get_price_per_10000_usd,
    )


def chunk_cost(
    schedule: PricingSchedule,
    chunk_size_gb: float,
    workload: WorkloadProfile,
    total_size_gb: float,
) -> float:
    """Cost of one chunk: the workload scaled by the chunk's share of the data."""
    if total_size_gb <= 0:
        raise ValueError("total_size_gb must be > 0")
    if chunk_size_gb <= 0 or chunk_size_gb > total_size_gb:
        raise ValueError(f"chunk_size_gb must be in (0, {total_size_gb}], got {chunk_size_gb}")
    return monthly_cost(schedule, workload.scaled(chunk_size_gb / total_size_gb)).total_usd


def chunk_cost_usd(
    schedule: PricingSchedule,
    chunk_size_gb: float,
    workload: WorkloadProfile,
    total_size_gb: float,
) -> int:
    """:func:`chunk_cost` rounded up to whole dollars, the planner's budget unit."""
    # guard against 12.000000000001 rounding up to 13
    return math.ceil(round(chunk_cost(schedule, chunk_size_gb, workload, total_size_gb), 9))
