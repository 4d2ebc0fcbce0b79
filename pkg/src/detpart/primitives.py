"""Deterministic building blocks shared by every phase.

Everything in this module is a pure function of its explicit arguments.
Output never depends on thread count, scheduling, or iteration interleaving,
which is what makes the partitioner reproducible end to end.

All pseudo-randomness comes from splitmix64, pinned by its update equations
so the streams are reproducible bit for bit in any implementation:

    state   <- state + 0x9E3779B97F4A7C15                 (mod 2**64)
    z       <- state
    z       <- (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9     (mod 2**64)
    z       <- (z XOR (z >> 27)) * 0x94D049BB133111EB     (mod 2**64)
    output  <- z XOR (z >> 31)

``mix64(x)`` is defined as one generator step from state x (add the golden
constant, then finalize); it doubles as the hash and tie-break function.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
from numba import njit

from . import parallel

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """One splitmix64 step from state x; used as hash and tie-break."""
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def seed_combine(*parts: int) -> int:
    """Fold any number of integers into one 64-bit seed.

    Order-sensitive: seed_combine(a, b) != seed_combine(b, a) in general.
    Negative inputs are reduced mod 2**64.
    """
    h = 0
    for p in parts:
        h = mix64(h ^ (p & MASK64))
    return h


class SplitMix64:
    """Sequential splitmix64 generator, seeded with a 64-bit state."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)

    def next_below(self, n: int) -> int:
        # modulo bias is irrelevant for n << 2**64 and costs no determinism
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n


def seeded_tiebreak(seed: int, ident: int, n: int) -> int:
    """Deterministic choice in [0, n) from (seed, ident); n >= 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return seed_combine(seed, ident) % n


# numba twins of the above; uint64 arithmetic wraps natively


@njit(nogil=True, cache=True)
def _nb_mix64(x):
    z = x + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


@njit(nogil=True, cache=True)
def _nb_fold(h, p):
    """One step of seed_combine's fold: h <- mix64(h ^ p)."""
    return _nb_mix64(h ^ p)


@njit(nogil=True, cache=True)
def _tag_chunk(items_n, seed, start, stop, tags):
    """Fill tags[start:stop] from a generator seeded with (seed, start)."""
    state = _nb_fold(_nb_fold(np.uint64(0), seed), np.uint64(start))
    for i in range(start, stop):
        state = state + np.uint64(GOLDEN)
        z = state
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        tags[i] = z & np.uint64(0xFF)


@njit(nogil=True, cache=True)
def _shuffle_bucket(out, start, stop, seed, tag):
    """Fisher-Yates on out[start:stop], generator seeded with (seed, tag)."""
    state = _nb_fold(_nb_fold(np.uint64(0), seed), np.uint64(tag))
    m = stop - start
    for i in range(m - 1, 0, -1):
        state = state + np.uint64(GOLDEN)
        z = state
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        j = np.int64(z % np.uint64(i + 1))
        a = start + i
        b = start + j
        tmp = out[a]
        out[a] = out[b]
        out[b] = tmp


def _element_tags(n: int, seed: int, chunk_count: int) -> np.ndarray:
    """8-bit tag per position: chunk c covers a contiguous index range and
    draws its tags from a generator seeded with (seed, first index)."""
    tags = np.empty(n, dtype=np.uint64)
    if n == 0:
        return tags.astype(np.int64)
    chunk_len = -(-n // chunk_count)
    starts = list(range(0, n, chunk_len))
    seed_u = np.uint64(seed & MASK64)

    def work(lo: int, hi: int) -> None:
        for ci in range(lo, hi):
            s = starts[ci]
            _tag_chunk(n, seed_u, s, min(n, s + chunk_len), tags)

    parallel.run_range(len(starts), work, grain=1)
    return tags.astype(np.int64)


def det_shuffle(items, seed: int, chunk_count: int = 256) -> np.ndarray:
    """Deterministic parallel shuffle of an integer array.

    Tags every element with 8 pseudo-random bits (per-chunk generators seeded
    with (seed, chunk start index)), stably sorts by tag, then Fisher-Yates
    shuffles each tag bucket with a generator seeded with (seed, tag).
    The result is a permutation that is a pure function of (items, seed,
    chunk_count) and is identical for any thread count.
    """
    arr = np.ascontiguousarray(np.asarray(items, dtype=np.int64))
    n = arr.shape[0]
    if chunk_count < 1:
        raise ValueError("chunk_count must be >= 1")
    if n <= 1:
        return arr.copy()
    tags = _element_tags(n, seed, chunk_count)
    order = np.argsort(tags, kind="stable")
    out = arr[order]
    counts = np.bincount(tags, minlength=256)
    offsets = np.zeros(257, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    seed_u = np.uint64(seed & MASK64)

    def work(lo: int, hi: int) -> None:
        for t in range(lo, hi):
            if offsets[t + 1] - offsets[t] > 1:
                _shuffle_bucket(out, offsets[t], offsets[t + 1], seed_u, t)

    parallel.run_range(256, work, grain=32)
    return out


@dataclass
class SubRoundPlan:
    """A tag-sorted permutation of the input plus sub-round boundaries."""

    permuted_items: np.ndarray
    round_offsets: np.ndarray  # length = sub_rounds + 1

    @property
    def num_rounds(self) -> int:
        return len(self.round_offsets) - 1

    def round_items(self, b: int) -> np.ndarray:
        return self.permuted_items[self.round_offsets[b]:self.round_offsets[b + 1]]

    def __iter__(self) -> Iterator[np.ndarray]:
        for b in range(self.num_rounds):
            yield self.round_items(b)


def split_sub_rounds(items, seed: int, sub_rounds: int) -> SubRoundPlan:
    """Split items into sub_rounds deterministic groups.

    Uses the same 8-bit tagging as det_shuffle; sub-round b receives the
    elements whose tag t satisfies floor(t * sub_rounds / 256) == b, in
    stable tag-sorted order. With sub_rounds == 256 each tag is its own
    sub-round. Requires 1 <= sub_rounds <= 256.
    """
    if not 1 <= sub_rounds <= 256:
        raise ValueError("sub_rounds must be in [1, 256]")
    arr = np.ascontiguousarray(np.asarray(items, dtype=np.int64))
    n = arr.shape[0]
    if n == 0:
        return SubRoundPlan(arr.copy(), np.zeros(sub_rounds + 1, dtype=np.int64))
    tags = _element_tags(n, seed, 256)
    order = np.argsort(tags, kind="stable")
    permuted = arr[order]
    counts = np.bincount(tags, minlength=256)
    tag_offsets = np.zeros(257, dtype=np.int64)
    np.cumsum(counts, out=tag_offsets[1:])
    # sub-round b covers tags [ceil(b*256/r), ceil((b+1)*256/r))
    bounds = np.array(
        [tag_offsets[-(-b * 256 // sub_rounds)] for b in range(sub_rounds)]
        + [np.int64(n)],
        dtype=np.int64,
    )
    return SubRoundPlan(permuted, bounds)


def counting_sort(items: Sequence, key: Callable[[object], int], max_key: int):
    """Stable sort of items by an integer key in [0, max_key).

    Returns (sorted_items, offsets) where offsets has max_key + 1 entries:
    offsets[c] is the first position of key c in the output and
    offsets[max_key] == len(items). Items with equal keys keep input order.
    """
    if max_key < 1:
        raise ValueError("max_key must be >= 1")
    arr_in = isinstance(items, np.ndarray)
    n = len(items)
    keys = np.empty(n, dtype=np.int64)
    for i in range(n):
        keys[i] = key(items[i])
    if n and (keys.min() < 0 or keys.max() >= max_key):
        raise ValueError("key out of range [0, max_key)")
    order = np.argsort(keys, kind="stable")
    counts = np.bincount(keys, minlength=max_key)
    offsets = np.zeros(max_key + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    if arr_in:
        return items[order], offsets
    return [items[i] for i in order], offsets


def prefix_sum(values) -> np.ndarray:
    """Exclusive prefix sum of integers; out[i] = sum(values[:i]).

    Raises OverflowError if any prefix leaves the signed 64-bit range.
    """
    arr = np.asarray(values)
    if arr.size == 0:
        return np.zeros(0, dtype=np.int64)
    if not np.issubdtype(arr.dtype, np.integer):
        raise TypeError("prefix_sum expects integers")
    # cheap certificate: if sum(|v|) fits comfortably, every prefix does
    bound = float(np.abs(arr.astype(np.float64)).sum())
    if bound < float(2**62):
        out = np.zeros(arr.size, dtype=np.int64)
        np.cumsum(arr.astype(np.int64)[:-1], out=out[1:])
        return out
    out = np.zeros(arr.size, dtype=np.int64)
    acc = 0
    for i, v in enumerate(arr.tolist()):
        out[i] = acc
        acc += int(v)
        if not (-(2**63) <= acc < 2**63):
            raise OverflowError("prefix sum exceeds 64-bit range")
    return out
