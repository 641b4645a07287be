"""Monte Carlo check of the analytic loss and availability formulas.

Randomness comes from numpy's PCG64 bit generator. Trials are cut into
fixed-size blocks and block ``i`` draws from ``SeedSequence(seed,
spawn_key=(i,))``, so a report depends only on (inputs, seed, trials) and
blocks can be evaluated in any order or on any worker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from cloudplace.chunkplan import ChunkAssignment
from cloudplace.catalog import Provider

BLOCK_TRIALS = 1 << 16
Z95 = 1.959963984540054


@dataclass(frozen=True)
class SimulationReport:
    trials: int
    estimate: float
    std_error: float
    seed: int

    @property
    def ci95(self) -> tuple[float, float]:
        half = Z95 * self.std_error
        return (self.estimate - half, self.estimate + half)

    def within(self, analytic: float, n_se: float = 3.0) -> bool:
        """Whether ``analytic`` lies within ``n_se`` standard errors of the estimate."""
        tol = n_se * self.std_error
        return abs(self.estimate - analytic) <= tol + 1e-12

    def to_dict(self) -> dict[str, Any]:
        return {
            "trials": self.trials,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "ci95": list(self.ci95),
            "seed": self.seed,
        }


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _blocks(trials: int):
    for i, start in enumerate(range(0, trials, BLOCK_TRIALS)):
        yield i, min(BLOCK_TRIALS, trials - start)


def _check_indices(failure_indices: Sequence[float]) -> np.ndarray:
    p = np.asarray(failure_indices, dtype=float)
    if ((p <= 0) | (p > 1)).any():
        raise ValueError("failure indices must lie in (0, 1]")
    return p


def _run(
    trials: int,
    seed: int,
    width: int,
    probs: np.ndarray,
    per_trial: Callable[[np.ndarray], np.ndarray],
    bernoulli: bool,
) -> SimulationReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    total = 0.0
    total_sq = 0.0
    for block, size in _blocks(trials):
        down = block_generator(seed, block).random((size, width)) < probs
        x = per_trial(down).astype(float)
        total += x.sum()
        total_sq += (x * x).sum()
    mean = float(total / trials)
    if bernoulli:
        var = mean * (1 - mean)
    else:
        var = max(total_sq / trials - mean * mean, 0.0) * trials / max(trials - 1, 1)
    return SimulationReport(trials, mean, math.sqrt(var / trials), seed)


def simulate_data_loss(failure_indices: Sequence[float], trials: int, seed: int = 0) -> SimulationReport:
    """Fraction of trials in which every provider is down at once."""
    p = _check_indices(failure_indices)
    if p.size == 0:
        # nothing stored: data is lost in every trial
        return _run(trials, seed, 1, np.zeros(1), lambda down: np.ones(len(down)), True)
    return _run(trials, seed, p.size, p, lambda down: down.all(axis=1), True)


def simulate_chunk_availability(
    assignment: ChunkAssignment,
    providers: Sequence[Provider] | Mapping[int, float],
    trials: int,
    seed: int = 0,
) -> SimulationReport:
    """Mean number of chunks with at least one live replica.

    Each trial samples one up/down state per provider, shared by every chunk
    stored there.
    """
    if isinstance(providers, Mapping):
        failure = dict(providers)
    else:
        failure = {p.id: p.failure_index for p in providers}
    ids = sorted(failure)
    col = {pid: j for j, pid in enumerate(ids)}
    stored = [s for s in assignment.replicas if s.provider_ids]
    for s in stored:
        unknown = [pid for pid in s.provider_ids if pid not in col]
        if unknown:
            raise KeyError(f"assignment references unknown provider ids {unknown}")
    p = _check_indices([failure[pid] for pid in ids]) if ids else np.zeros(0)

    # membership[j, c] is True when provider j holds a replica of chunk c
    membership = np.zeros((max(len(ids), 1), len(stored)), dtype=bool)
    for c, s in enumerate(stored):
        for pid in s.provider_ids:
            membership[col[pid], c] = True

    def live_chunks(down: np.ndarray) -> np.ndarray:
        up = ~down
        return (up.astype(np.int64) @ membership.astype(np.int64) > 0).sum(axis=1)

    return _run(trials, seed, max(len(ids), 1), p if ids else np.zeros(1), live_chunks, False)
