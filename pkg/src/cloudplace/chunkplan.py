"""Maximum expected number of available chunks under a fixed budget.

Every chunk is either left unstored or replicated on exactly ``r`` distinct
providers. A chunk stored on set S survives unless all of S fail, so its
expected value is ``1 - prod(failure_index)``; the objective is the sum over
chunks.

The DP runs over chunks and integer budgets, trying every r-subset at each
cell. It is evaluated from the last chunk backwards so the reconstruction can
walk chunks in input order and take the first optimal choice, which gives
the tie rule: maximum value, then minimum cost, then the lexicographically
smallest per-chunk choice sequence (unstored sorts before any subset).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from decimal import Decimal
from itertools import combinations
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from cloudplace.catalog import Provider
from cloudplace.costmodel import WorkloadProfile, chunk_cost_usd
from cloudplace.maxavail import to_fixed

MAX_ENUMERATION = 10**7


@dataclass(frozen=True)
class ChunkSpec:
    chunk_id: str
    size_gb: float

    def __post_init__(self) -> None:
        if self.size_gb <= 0:
            raise ValueError(f"chunk {self.chunk_id}: size_gb must be > 0")


@dataclass(frozen=True)
class ReplicaSet:
    provider_ids: tuple[int, ...]
    cost_usd: int
    expected_value: float


UNSTORED = ReplicaSet((), 0, 0.0)


@dataclass(frozen=True)
class ChunkAssignment:
    chunk_ids: tuple[str, ...]
    replicas: tuple[ReplicaSet, ...]
    budget_usd: int
    r: int

    @property
    def per_chunk(self) -> dict[str, ReplicaSet]:
        return dict(zip(self.chunk_ids, self.replicas))

    @property
    def total_cost_usd(self) -> int:
        return sum(s.cost_usd for s in self.replicas)

    @property
    def total_expected_value(self) -> float:
        return math.fsum(s.expected_value for s in self.replicas)

    def to_dict(self) -> dict[str, Any]:
        return {
            "chunks": [
                {
                    "chunk_id": cid,
                    "providers": list(s.provider_ids),
                    "cost_usd": s.cost_usd,
                    "expected_value": s.expected_value,
                }
                for cid, s in zip(self.chunk_ids, self.replicas)
            ],
            "total_cost_usd": self.total_cost_usd,
            "total_expected_value": self.total_expected_value,
            "budget_usd": self.budget_usd,
            "r": self.r,
        }


def expected_value(failure_indices: Sequence[float]) -> float:
    """Probability that at least one replica survives; 0 for an unstored chunk.

    The product is taken in decimal arithmetic on the shortest repr of each
    input, so catalog values such as 0.05 and 0.1 give exactly 0.995.
    """
    if not failure_indices:
        return 0.0
    prod = Decimal(1)
    for p in failure_indices:
        if not 0 < p <= 1:
            raise ValueError(f"failure index must be in (0, 1], got {p}")
        prod *= Decimal(repr(float(p)))
    return float(1 - prod)


def equal_chunks(m: int, total_size_gb: float) -> list[ChunkSpec]:
    if m < 0:
        raise ValueError("chunk count must be >= 0")
    width = max(3, len(str(m)))
    return [ChunkSpec(f"chunk-{i:0{width}d}", total_size_gb / m) for i in range(1, m + 1)]


def load_chunks(path: str | Path) -> list[ChunkSpec]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    rows = doc["chunks"] if isinstance(doc, Mapping) else doc
    return [ChunkSpec(str(r["chunk_id"]), float(r["size_gb"])) for r in rows]


def chunk_cost_matrix(
    providers: Sequence[Provider], chunks: Sequence[ChunkSpec], workload: WorkloadProfile
) -> np.ndarray:
    """Integer USD cost of storing each chunk (rows) at each provider (columns).

    The workload is charged in proportion to chunk size. Providers without a
    pricing schedule fall back to their catalog monthly cost, prorated the
    same way.
    """
    total = math.fsum(c.size_gb for c in chunks)
    out = np.zeros((len(chunks), len(providers)), dtype=np.int64)
    for j, p in enumerate(providers):
        for k, c in enumerate(chunks):
            if p.pricing is not None:
                out[k, j] = chunk_cost_usd(p.pricing, c.size_gb, workload, total)
            else:
                out[k, j] = math.ceil(round(p.monthly_cost_usd * c.size_gb / total, 9))
    return out


class _Choices:
    """Per-chunk options: index 0 is "unstored", then r-subsets in lexicographic order."""

    def __init__(self, provider_ids: Sequence[int], failure: Sequence[float], costs: np.ndarray, r: int):
        n = len(provider_ids)
        if not 1 <= r <= n:
            raise ValueError(f"replication factor r must be in [1, {n}], got {r}")
        if len(set(provider_ids)) != n:
            raise ValueError("provider ids must be unique")
        order = sorted(range(n), key=lambda j: provider_ids[j])
        self.subsets: list[tuple[int, ...]] = [()]
        cols: list[tuple[int, ...]] = [()]
        for combo in combinations(order, r):
            self.subsets.append(tuple(provider_ids[j] for j in combo))
            cols.append(combo)
        self.expected = [expected_value([failure[j] for j in combo]) for combo in cols]
        self.value = np.array([to_fixed(e) for e in self.expected], dtype=np.int64)
        costs = np.asarray(costs, dtype=np.int64).reshape(-1, n)
        # cost[k, c]: cost of chunk k under choice c
        self.cost = np.zeros((costs.shape[0], len(cols)), dtype=np.int64)
        for c, combo in enumerate(cols):
            if combo:
                self.cost[:, c] = costs[:, list(combo)].sum(axis=1)

    def replica_set(self, k: int, c: int) -> ReplicaSet:
        if c == 0:
            return UNSTORED
        return ReplicaSet(self.subsets[c], int(self.cost[k, c]), self.expected[c])


def _validate(costs: np.ndarray, chunk_ids: Sequence[str], n: int, budget_usd: int) -> np.ndarray:
    if budget_usd < 0:
        raise ValueError("budget must be >= 0")
    costs = np.asarray(costs, dtype=np.int64).reshape(len(chunk_ids), n)
    if (costs < 0).any():
        raise ValueError("chunk costs must be >= 0")
    return costs


def solve_chunk_assignment(
    provider_ids: Sequence[int],
    failure: Sequence[float],
    costs: np.ndarray,
    chunk_ids: Sequence[str],
    r: int,
    budget_usd: int,
) -> ChunkAssignment:
    """DP over chunks and budgets given an explicit ``costs[chunk, provider]`` matrix."""
    costs = _validate(costs, chunk_ids, len(provider_ids), budget_usd)
    choices = _Choices(provider_ids, failure, costs, r)
    m, width = len(chunk_ids), budget_usd + 1

    # best[k, b]: optimum over chunks k..m-1 spending at most b
    best_v = np.zeros((m + 1, width), dtype=np.int64)
    best_c = np.zeros((m + 1, width), dtype=np.int64)
    for k in range(m - 1, -1, -1):
        cur_v = best_v[k]
        cur_c = best_c[k]
        cur_v[:] = best_v[k + 1]  # leave chunk k unstored
        cur_c[:] = best_c[k + 1]
        for c in range(1, len(choices.subsets)):
            w = int(choices.cost[k, c])
            if w > budget_usd:
                continue
            take_v = best_v[k + 1, : width - w] + choices.value[c]
            take_c = best_c[k + 1, : width - w] + w
            keep_v = cur_v[w:]
            keep_c = cur_c[w:]
            better = (take_v > keep_v) | ((take_v == keep_v) & (take_c < keep_c))
            keep_v[better] = take_v[better]
            keep_c[better] = take_c[better]

    picked = []
    b = budget_usd
    for k in range(m):
        for c in range(len(choices.subsets)):
            w = int(choices.cost[k, c])
            if (
                w <= b
                and best_v[k + 1, b - w] + choices.value[c] == best_v[k, b]
                and best_c[k + 1, b - w] + w == best_c[k, b]
            ):
                picked.append(choices.replica_set(k, c))
                b -= w
                break
        else:  # pragma: no cover - the optimum is always reachable
            raise AssertionError("backtrack failed")
    return ChunkAssignment(tuple(chunk_ids), tuple(picked), budget_usd, r)


def brute_force_chunk_assignment(
    provider_ids: Sequence[int],
    failure: Sequence[float],
    costs: np.ndarray,
    chunk_ids: Sequence[str],
    r: int,
    budget_usd: int,
) -> ChunkAssignment:
    """Enumerate every per-chunk choice sequence; the test oracle for the DP."""
    costs = _validate(costs, chunk_ids, len(provider_ids), budget_usd)
    choices = _Choices(provider_ids, failure, costs, r)
    m, options = len(chunk_ids), len(choices.subsets)
    if options**m > MAX_ENUMERATION:
        raise ValueError(f"{options}^{m} assignments exceeds the enumeration bound {MAX_ENUMERATION}")

    # C-order flattening: flat index order == lexicographic order of choice sequences
    value = np.zeros(1, dtype=np.int64)
    cost = np.zeros(1, dtype=np.int64)
    for k in range(m):
        value = (value[:, None] + choices.value[None, :]).ravel()
        cost = (cost[:, None] + choices.cost[k][None, :]).ravel()

    feasible = cost <= budget_usd
    best_v = value[feasible].max()
    tied = feasible & (value == best_v)
    best_c = cost[tied].min()
    flat = int(np.flatnonzero(tied & (cost == best_c))[0])
    seq = np.unravel_index(flat, (options,) * m) if m else ()
    picked = tuple(choices.replica_set(k, int(c)) for k, c in enumerate(seq))
    return ChunkAssignment(tuple(chunk_ids), picked, budget_usd, r)


def _problem(providers: Sequence[Provider], chunks: Sequence[ChunkSpec], workload: WorkloadProfile):
    ids = [p.id for p in providers]
    failure = [p.failure_index for p in providers]
    costs = chunk_cost_matrix(providers, chunks, workload) if chunks else np.zeros((0, len(providers)))
    return ids, failure, costs, [c.chunk_id for c in chunks]


def solve_max_expected_value(
    providers: Sequence[Provider],
    chunks: Sequence[ChunkSpec],
    r: int,
    budget_usd: int,
    workload: WorkloadProfile,
) -> ChunkAssignment:
    ids, failure, costs, chunk_ids = _problem(providers, chunks, workload)
    return solve_chunk_assignment(ids, failure, costs, chunk_ids, r, budget_usd)


def brute_force_max_expected_value(
    providers: Sequence[Provider],
    chunks: Sequence[ChunkSpec],
    r: int,
    budget_usd: int,
    workload: WorkloadProfile,
) -> ChunkAssignment:
    ids, failure, costs, chunk_ids = _problem(providers, chunks, workload)
    return brute_force_chunk_assignment(ids, failure, costs, chunk_ids, r, budget_usd)
