"""Maximum availability under a fixed budget, solved as a 0/1 knapsack.

Each provider is an item whose weight is its monthly cost and whose value is
``-log10(failure_index)``; maximizing the summed value minimizes the joint
failure index of the chosen replica set.

Ties are broken deterministically: among equal-value selections the cheaper
one wins, and among equal cost the lexicographically smallest sorted id tuple.
Values are compared in fixed point (``VALUE_SCALE`` units) so that ties are
exact and the DP agrees bit-for-bit with the exhaustive oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from cloudplace.catalog import Provider

VALUE_SCALE = 10**12
MAX_BRUTE_FORCE_PROVIDERS = 20


def to_fixed(value: float) -> int:
    return int(round(value * VALUE_SCALE))


@dataclass(frozen=True)
class AvailabilityPlan:
    selected: tuple[Provider, ...]
    total_cost_usd: int
    total_value: float
    budget_usd: int

    @property
    def selected_ids(self) -> frozenset[int]:
        return frozenset(p.id for p in self.selected)

    @property
    def failure_index(self) -> float:
        return 10.0 ** (-self.total_value)

    @property
    def availability_percent(self) -> float:
        return availability_from_value(self.total_value)

    def to_dict(self) -> dict[str, Any]:
        return {
            "selected": [
                {"id": p.id, "name": p.name, "cost_usd": p.monthly_cost_usd, "log_value": p.log_value}
                for p in self.selected
            ],
            "total_cost_usd": self.total_cost_usd,
            "total_value": self.total_value,
            "failure_index": self.failure_index,
            "availability_percent": self.availability_percent,
            "budget_usd": self.budget_usd,
        }


def availability_from_value(total_value: float) -> float:
    """Availability percent for a summed log-value: ``100 - 10**-value``."""
    if total_value < 0:
        raise ValueError("total_value must be >= 0")
    return 100.0 - 10.0 ** (-total_value)


def make_plan(selected: Iterable[Provider], budget_usd: int) -> AvailabilityPlan:
    chosen = tuple(sorted(selected, key=lambda p: p.id))
    return AvailabilityPlan(
        selected=chosen,
        total_cost_usd=sum(p.monthly_cost_usd for p in chosen),
        total_value=math.fsum(p.log_value for p in chosen),
        budget_usd=budget_usd,
    )


def _check_inputs(providers: Sequence[Provider], budget_usd: int) -> None:
    if budget_usd < 0:
        raise ValueError("budget must be >= 0")
    for p in providers:
        if p.monthly_cost_usd <= 0:
            raise ValueError(f"provider {p.id} must have a positive cost")
    if len({p.id for p in providers}) != len(providers):
        raise ValueError("provider ids must be unique")


class KnapsackTable:
    """The filled DP table ``V[i, b]`` over items and integer budgets.

    Rows run over providers in *descending* id order, so the backtrack (which
    walks rows from last to first) considers the smallest id first and can
    take it whenever doing so keeps the optimum.
    """

    def __init__(self, providers: Sequence[Provider], max_budget: int):
        _check_inputs(providers, max_budget)
        self.items = sorted(providers, key=lambda p: p.id, reverse=True)
        n, width = len(self.items), max_budget + 1
        self.max_budget = max_budget
        self.value = np.zeros((n + 1, width), dtype=np.int64)
        self.cost = np.zeros((n + 1, width), dtype=np.int64)
        for i, item in enumerate(self.items, start=1):
            self.value[i] = self.value[i - 1]
            self.cost[i] = self.cost[i - 1]
            w = item.monthly_cost_usd
            if w > max_budget:
                continue
            take_v = self.value[i - 1, : width - w] + to_fixed(item.log_value)
            take_c = self.cost[i - 1, : width - w] + w
            keep_v = self.value[i, w:]
            keep_c = self.cost[i, w:]
            better = (take_v > keep_v) | ((take_v == keep_v) & (take_c < keep_c))
            keep_v[better] = take_v[better]
            keep_c[better] = take_c[better]

    def best_value(self, budget: int) -> float:
        return int(self.value[-1, budget]) / VALUE_SCALE

    def select(self, budget: int) -> list[Provider]:
        if not 0 <= budget <= self.max_budget:
            raise ValueError(f"budget {budget} outside table range 0..{self.max_budget}")
        chosen = []
        b = budget
        for i in range(len(self.items), 0, -1):
            item = self.items[i - 1]
            w = item.monthly_cost_usd
            if (
                w <= b
                and self.value[i - 1, b - w] + to_fixed(item.log_value) == self.value[i, b]
                and self.cost[i - 1, b - w] + w == self.cost[i, b]
            ):
                chosen.append(item)
                b -= w
        return chosen

    def plan(self, budget: int) -> AvailabilityPlan:
        return make_plan(self.select(budget), budget)


def solve_max_availability(providers: Sequence[Provider], budget_usd: int) -> AvailabilityPlan:
    return KnapsackTable(providers, budget_usd).plan(budget_usd)


def sweep_max_availability(
    providers: Sequence[Provider], budgets: Iterable[int]
) -> list[AvailabilityPlan]:
    """Plans for many budgets from a single table sized for the largest."""
    budgets = list(budgets)
    if not budgets:
        return []
    table = KnapsackTable(providers, max(budgets))
    return [table.plan(b) for b in budgets]


def brute_force_max_availability(providers: Sequence[Provider], budget_usd: int) -> AvailabilityPlan:
    """Exhaustive search over all subsets; the test oracle for the DP."""
    _check_inputs(providers, budget_usd)
    n = len(providers)
    if n > MAX_BRUTE_FORCE_PROVIDERS:
        raise ValueError(f"brute force supports at most {MAX_BRUTE_FORCE_PROVIDERS} providers, got {n}")
    items = sorted(providers, key=lambda p: p.id)
    masks = np.arange(2**n, dtype=np.int64)
    members = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    costs = members.astype(np.int64) @ np.array([p.monthly_cost_usd for p in items], dtype=np.int64)
    values = members.astype(np.int64) @ np.array([to_fixed(p.log_value) for p in items], dtype=np.int64)

    feasible = costs <= budget_usd
    best_v = values[feasible].max()
    tied = feasible & (values == best_v)
    best_c = costs[tied].min()
    candidates = np.flatnonzero(tied & (costs == best_c))
    best = min(
        (tuple(items[j].id for j in range(n) if members[m, j]) for m in candidates),
    )
    return make_plan([p for p in items if p.id in best], budget_usd)
