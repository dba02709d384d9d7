"""Seeded random streams, label shuffling and the permutation p-value rule."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import CapacityError, InvalidInputError

_U64 = 2**64


@dataclass(frozen=True)
class SeedSpec:
    """A (master seed, stream id) pair naming one independent random stream."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) < _U64):
                raise InvalidInputError(f"{name} must be an unsigned 64-bit integer, got {v}")
            object.__setattr__(self, name, int(v))

    def child(self, *keys: int) -> SeedSpec:
        """Derive a sub-stream; the same keys always give the same child."""
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id, *map(int, keys)))
        return SeedSpec(self.master_seed, int(ss.generate_state(1, np.uint64)[0]))


def derive_stream(seed: SeedSpec) -> np.random.Generator:
    """Counter-based Philox generator keyed by the seed spec."""
    ss = np.random.SeedSequence(seed.master_seed, spawn_key=(seed.stream_id,))
    return np.random.Generator(np.random.Philox(ss))


def shuffled_rows(labels, n_rows: int, rng: np.random.Generator) -> np.ndarray:
    """Return ``n_rows`` independent uniform permutations of ``labels`` as a 2-D array."""
    labels = np.asarray(labels)
    return rng.permuted(np.tile(labels, (n_rows, 1)), axis=1)


@dataclass
class PermTrace:
    observed: float
    permuted: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.permuted = np.asarray(self.permuted, dtype=float).ravel()
        if self.permuted.size < 1:
            raise InvalidInputError("a permutation trace needs at least one permuted statistic")

    @property
    def n_perms(self) -> int:
        return int(self.permuted.size)


def permutation_pvalue(trace: PermTrace) -> float:
    """Add-one estimate (1 + #{permuted >= observed}) / (1 + B); never zero."""
    if trace.permuted.size < 1:
        raise InvalidInputError("empty permutation trace")
    exceed = int(np.count_nonzero(trace.permuted >= trace.observed))
    return (1 + exceed) / (1 + trace.permuted.size)


def count_arrangements(labels: Sequence) -> int:
    """Number of distinct orderings of a multiset of labels."""
    counts = Counter(labels).values()
    total = math.factorial(sum(counts))
    for c in counts:
        total //= math.factorial(c)
    return total


def enumerate_label_assignments(labels: Sequence, limit: int = 100_000) -> Iterator[tuple]:
    """Yield every distinct permutation of ``labels`` exactly once.

    Raises CapacityError before yielding anything if the count exceeds ``limit``.
    """
    items = sorted(labels)
    count = count_arrangements(items)
    if count > limit:
        raise CapacityError(count, limit)
    return _multiset_permutations(items)


def _multiset_permutations(items: list) -> Iterator[tuple]:
    # lexicographic next-permutation; skips duplicates by construction
    a = list(items)
    n = len(a)
    while True:
        yield tuple(a)
        i = n - 2
        while i >= 0 and a[i] >= a[i + 1]:
            i -= 1
        if i < 0:
            return
        j = n - 1
        while a[j] <= a[i]:
            j -= 1
        a[i], a[j] = a[j], a[i]
        a[i + 1:] = reversed(a[i + 1:])
