"""First-return excursion sampling for the embedded Markov chain.

An excursion from base state ``k`` is the path ``X_0 = k, X_1, ...`` of the
chain driven by the row-stochastic kernel, stopped at the first step ``tau``
with ``X_tau = k``.  Paths that fail to return within a hard length cap are
counted as truncations rather than silently dropped.

Reproducibility contract: :func:`sample_batch` is a pure function of
``(kernel, k, count, seed, cap, shards)``.  Attempts are assigned to shards
in contiguous blocks of ``ceil(count / shards)``; shard ``s`` draws from a
PCG64 generator whose seed is ``mix_seed(seed, s)``, the SplitMix64 mix
documented below, so the result does not depend on execution order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import AllTruncated
from .matrix_core import RowDecomposition

__all__ = [
    "RowSampler",
    "Excursion",
    "Truncation",
    "SampleBatch",
    "mix_seed",
    "build_sampler",
    "sample_excursion",
    "sample_batch",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB


def mix_seed(seed: int, index: int) -> int:
    """Derive the stream seed for (seed, index) with the SplitMix64 finalizer.

    The base seed is advanced by ``index + 1`` golden-ratio increments and
    passed through the standard xor-shift/multiply finalizer.  The constants
    are fixed so batches are reproducible everywhere.
    """
    z = (seed + (index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class RowSampler:
    """Inverse-CDF sampling tables for one transition kernel.

    Attributes:
        cumulative: (N, N) row-wise cumulative probabilities; each row is
            non-decreasing and ends at 1 up to roundoff.
        last_positive: per-row index of the last state with positive
            probability, used to clamp lookups so impossible transitions
            are never drawn.
    """

    cumulative: np.ndarray
    last_positive: np.ndarray

    @property
    def n(self) -> int:
        return self.cumulative.shape[0]


@dataclass(frozen=True)
class Excursion:
    """One first-return path: visits = (X_0, ..., X_{tau-1}), X_tau = base."""

    base_state: int
    visits: np.ndarray
    return_time: int


@dataclass(frozen=True)
class Truncation:
    """Outcome of an attempt that did not return within ``cap`` steps."""

    base_state: int
    cap: int


@dataclass(frozen=True)
class SampleBatch:
    """A deterministic batch of first-return excursions from one base state.

    The visit sequences are stored flat (``states``) with one length per
    kept excursion (``lengths``), ordered by attempt; truncated attempts are
    excluded from the arrays but counted.  ``excursions`` materializes the
    per-path view on demand.
    """

    base_state: int
    states: np.ndarray
    lengths: np.ndarray
    truncated_count: int
    seed: int
    cap: int
    shards: int
    shard_path_counts: np.ndarray

    @property
    def path_count(self) -> int:
        """Number of non-truncated excursions."""
        return int(self.lengths.shape[0])

    @property
    def attempted(self) -> int:
        return self.path_count + self.truncated_count

    @cached_property
    def offsets(self) -> np.ndarray:
        """Start index of each excursion inside ``states``."""
        out = np.zeros(self.lengths.shape[0], dtype=np.int64)
        np.cumsum(self.lengths[:-1], out=out[1:])
        return out

    @cached_property
    def excursions(self) -> list[Excursion]:
        parts = np.split(self.states, np.cumsum(self.lengths)[:-1])
        return [
            Excursion(self.base_state, visits, int(visits.shape[0]))
            for visits in parts
        ]


def build_sampler(decomp: RowDecomposition) -> RowSampler:
    """Build the inverse-CDF tables for a row decomposition."""
    cumulative = np.cumsum(decomp.kernel, axis=1)
    positive = decomp.kernel > 0.0
    # Every row has a positive entry because the fitness is a positive sum.
    last_positive = decomp.kernel.shape[1] - 1 - np.argmax(positive[:, ::-1], axis=1)
    cumulative.flags.writeable = False
    last_positive.flags.writeable = False
    return RowSampler(cumulative=cumulative, last_positive=last_positive)


def _step_states(sampler_cum: np.ndarray, last_positive: np.ndarray,
                 current: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized inverse-CDF transition for one step of many walkers."""
    rows = sampler_cum[current]
    nxt = (rows <= u[:, None]).sum(axis=1)
    return np.minimum(nxt, last_positive[current])


def sample_excursion(sampler: RowSampler, k: int, rng: np.random.Generator,
                     cap: int) -> Excursion | Truncation:
    """Sample one first-return excursion from state ``k``.

    Returns a :class:`Truncation` if the chain does not come back to ``k``
    within ``cap`` steps; truncation is an outcome, not an error.
    """
    if not 0 <= k < sampler.n:
        raise ValueError(f"base state {k} outside 0..{sampler.n - 1}")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    visits = [k]
    current = k
    for _ in range(cap):
        u = rng.random()
        row = sampler.cumulative[current]
        nxt = int(np.searchsorted(row, u, side="right"))
        current = min(nxt, int(sampler.last_positive[current]))
        if current == k:
            arr = np.asarray(visits, dtype=np.int64)
            return Excursion(base_state=k, visits=arr, return_time=len(visits))
        visits.append(current)
    return Truncation(base_state=k, cap=cap)


def _walk_block(sampler: RowSampler, k: int, block: int,
                rng: np.random.Generator, cap: int):
    """Run ``block`` first-return attempts at once.

    All still-active walkers advance together each step, consuming one
    uniform per walker in walker order; this is deterministic for a fixed
    generator state.  Returns (flat visit states, per-path lengths,
    truncated count) with truncated attempts removed from the flat arrays.
    """
    cum = sampler.cumulative
    last_positive = sampler.last_positive

    active = np.arange(block, dtype=np.int64)
    current = np.full(block, k, dtype=np.int64)
    return_time = np.zeros(block, dtype=np.int64)
    record_walker = [active]
    record_state = [current]

    step = 0
    while active.size and step < cap:
        step += 1
        u = rng.random(active.size)
        nxt = _step_states(cum, last_positive, current, u)
        returned = nxt == k
        return_time[active[returned]] = step
        keep = ~returned
        active = active[keep]
        current = nxt[keep]
        if active.size:
            record_walker.append(active)
            record_state.append(current)

    walkers = np.concatenate(record_walker)
    states = np.concatenate(record_state)
    truncated = active
    if truncated.size:
        dead = np.zeros(block, dtype=bool)
        dead[truncated] = True
        alive = ~dead[walkers]
        walkers = walkers[alive]
        states = states[alive]
    order = np.argsort(walkers, kind="stable")
    lengths = return_time[return_time > 0]
    return states[order], lengths, int(truncated.size)


def sample_batch(sampler: RowSampler, k: int, count: int, seed: int,
                 cap: int = 10**6, shards: int = 1) -> SampleBatch:
    """Sample ``count`` excursion attempts, split deterministically by shard.

    Args:
        sampler: tables from :func:`build_sampler`.
        k: base state, 0-based.
        count: number of attempts (>= 1).
        seed: 64-bit batch seed.
        cap: hard per-path length cap.
        shards: number of independent RNG streams; the batch is identical
            for fixed ``(seed, shards, count, cap)`` however it is executed.

    Raises:
        AllTruncated: every attempt hit the cap.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if shards < 1:
        raise ValueError("shards must be >= 1")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if not 0 <= k < sampler.n:
        raise ValueError(f"base state {k} outside 0..{sampler.n - 1}")

    block = -(-count // shards)
    all_states = []
    all_lengths = []
    shard_path_counts = np.zeros(shards, dtype=np.int64)
    truncated_total = 0
    for s in range(shards):
        size = min(block, count - s * block)
        if size <= 0:
            break
        rng = np.random.default_rng(mix_seed(seed, s))
        states, lengths, truncated = _walk_block(sampler, k, size, rng, cap)
        all_states.append(states)
        all_lengths.append(lengths)
        shard_path_counts[s] = lengths.shape[0]
        truncated_total += truncated

    states = np.concatenate(all_states) if all_states else np.empty(0, np.int64)
    lengths = np.concatenate(all_lengths) if all_lengths else np.empty(0, np.int64)
    if lengths.size == 0:
        raise AllTruncated(count, cap)
    states.flags.writeable = False
    lengths.flags.writeable = False
    shard_path_counts.flags.writeable = False
    return SampleBatch(
        base_state=k,
        states=states,
        lengths=lengths,
        truncated_count=truncated_total,
        seed=seed,
        cap=cap,
        shards=shards,
        shard_path_counts=shard_path_counts,
    )
