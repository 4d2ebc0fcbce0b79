"""Synchronous k-way label propagation refinement.

Each round splits its worklist into sub-rounds. A sub-round computes every
vertex's best move against the frozen partition, keeps only positive-gain
proposals, approves a balance-preserving subset per block pair (the longest
feasible prefixes of the two gain-sorted move sequences), applies them, and
sums the attributed gains. A negative sub-round total is reverted entirely,
so connectivity never increases. From the second round on, only vertices
adjacent to a previous round's applied moves are reconsidered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import parallel
from .config import PartitionConfig
from .hypergraph import Hypergraph, PartitionState
from .primitives import seed_combine, split_sub_rounds

_SEED_DOMAIN = 0x40


def level_seed(base_seed: int, level: int) -> int:
    """Per-level refinement seed, so levels draw distinct sub-round splits."""
    return seed_combine(base_seed, _SEED_DOMAIN, level)


@dataclass(frozen=True)
class ProposedMove:
    vertex: int
    source: int
    target: int
    gain: int  # frozen-state gain, always positive


@dataclass
class ProposedMoves:
    """Column layout of many proposed moves."""

    vertices: np.ndarray
    sources: np.ndarray
    targets: np.ndarray
    gains: np.ndarray

    def __len__(self) -> int:
        return int(self.vertices.shape[0])

    @classmethod
    def empty(cls) -> "ProposedMoves":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.copy(), z.copy(), z.copy())

    @classmethod
    def from_moves(cls, moves) -> "ProposedMoves":
        ms = list(moves)
        return cls(np.array([m.vertex for m in ms], dtype=np.int64),
                   np.array([m.source for m in ms], dtype=np.int64),
                   np.array([m.target for m in ms], dtype=np.int64),
                   np.array([m.gain for m in ms], dtype=np.int64))


@njit(nogil=True, cache=True)
def _gain_chunk(verts, lo, hi, inc_off, inc, ew, pin_count, k, assignment,
                out_target, out_gain):
    gains = np.zeros(k, dtype=np.int64)
    for idx in range(lo, hi):
        v = verts[idx]
        s = assignment[v]
        internal = np.int64(0)
        for p in range(inc_off[v], inc_off[v + 1]):
            e = inc[p]
            w = ew[e]
            if pin_count[e, s] > 1:
                internal += w
            for i in range(k):
                if pin_count[e, i] > 0:
                    gains[i] += w
        best = np.int64(-1)
        bg = np.int64(-1)
        for i in range(k):
            if i != s and gains[i] > bg:
                bg = gains[i]
                best = i
        g = bg - internal
        if best >= 0 and g > 0:
            out_target[idx] = best
            out_gain[idx] = g
        else:
            out_target[idx] = -1
            out_gain[idx] = 0
        for i in range(k):
            gains[i] = 0


def compute_max_gain_move(H: Hypergraph, P: PartitionState, v: int):
    """Best strictly-improving move for v against the frozen partition.

    The candidate score for block j is the weight of incident hyperedges
    that touch j; subtracting the weight of hyperedges with more than one
    pin in v's block gives the exact connectivity delta of moving v to j.
    Ties prefer the smaller block id; returns None when nothing improves.
    """
    verts = np.array([v], dtype=np.int64)
    out_t = np.empty(1, dtype=np.int64)
    out_g = np.empty(1, dtype=np.int64)
    _gain_chunk(verts, 0, 1, H.incidence_offsets, H.incident_nets,
                H.hyperedge_weight, P.pin_count, np.int64(P.k),
                P.assignment, out_t, out_g)
    if out_t[0] < 0:
        return None
    return ProposedMove(int(v), int(P.assignment[v]), int(out_t[0]),
                        int(out_g[0]))


@njit(nogil=True, cache=True)
def _apply_moves(mv, ms, mt, inc_off, inc, ew, pin_count, lam, assignment,
                 block_weight, vw):
    """Apply moves in order; returns the summed attributed gain.

    The per-(hyperedge, block) counter updates commute over integers, and
    exactly one decrement reaches zero / one increment reaches one, so the
    attributed sum is independent of application order.
    """
    att = np.int64(0)
    for idx in range(mv.shape[0]):
        v = mv[idx]
        s = ms[idx]
        t = mt[idx]
        for p in range(inc_off[v], inc_off[v + 1]):
            e = inc[p]
            pin_count[e, s] -= 1
            if pin_count[e, s] == 0:
                att += ew[e]
                lam[e] -= 1
            pin_count[e, t] += 1
            if pin_count[e, t] == 1:
                att -= ew[e]
                lam[e] += 1
        assignment[v] = t
        block_weight[s] -= vw[v]
        block_weight[t] += vw[v]
    return att


def perform_move(H: Hypergraph, P: PartitionState, v: int, s: int, t: int) -> int:
    """Move v from s to t, updating pin counts, connectivity values, block
    weights; returns the attributed gain (weight of hyperedges leaving the
    cut minus weight of those entering it, as seen by this move)."""
    if P.assignment[v] != s:
        raise ValueError("vertex is not in the stated source block")
    if s == t:
        raise ValueError("source and target blocks must differ")
    return int(_apply_moves(np.array([v], dtype=np.int64),
                            np.array([s], dtype=np.int64),
                            np.array([t], dtype=np.int64),
                            H.incidence_offsets, H.incident_nets,
                            H.hyperedge_weight, P.pin_count, P.connectivity,
                            P.assignment, P.block_weight, H.vertex_weight))


@dataclass
class SwapSequences:
    """Directed move sequences of one block pair, gain-sorted, plus budgets.

    cum_st[i] is the total vertex weight of the first i moves from s to t
    (cum_st[0] == 0); budget_t bounds how much weight block t may gain net,
    budget_s the same for block s.
    """

    idx_st: np.ndarray  # indices into the caller's move arrays
    idx_ts: np.ndarray
    cum_st: np.ndarray  # int64, len(idx_st) + 1
    cum_ts: np.ndarray
    budget_s: int
    budget_t: int

    @classmethod
    def build(cls, idx_st, tie_st, gains_st, weights_st,
              idx_ts, tie_ts, gains_ts, weights_ts,
              budget_s: int, budget_t: int) -> "SwapSequences":
        if budget_s < 0 or budget_t < 0:
            raise ValueError("budgets must be non-negative")

        def sort_side(idx, tie, gains, weights):
            if len(idx) == 0:
                return idx, np.zeros(1, dtype=np.int64)
            order = np.lexsort((tie, -gains))
            cum = np.zeros(len(idx) + 1, dtype=np.int64)
            np.cumsum(weights[order], out=cum[1:])
            return idx[order], cum

        o_st, cum_st = sort_side(idx_st, tie_st, gains_st, weights_st)
        o_ts, cum_ts = sort_side(idx_ts, tie_ts, gains_ts, weights_ts)
        return cls(o_st, o_ts, cum_st, cum_ts, int(budget_s), int(budget_t))


def longest_feasible_prefixes_sequential(seq: SwapSequences):
    """Reference simultaneous traversal; used as the oracle and for tiny
    inputs. Keeps the last feasible (i, j) seen while advancing the side
    with the smaller cumulative weight (s side on ties only when t side is
    exhausted)."""
    cum_st, cum_ts = seq.cum_st, seq.cum_ts
    bs, bt = seq.budget_s, seq.budget_t
    n_i = len(cum_st) - 1
    n_j = len(cum_ts) - 1
    i = j = 0
    best_i = best_j = 0
    while True:
        diff = cum_st[i] - cum_ts[j]
        if -bs <= diff <= bt:
            best_i, best_j = i, j
        if i < n_i and (diff < 0 or j == n_j):
            i += 1
        elif j < n_j:
            j += 1
        else:
            break
    return best_i, best_j


@njit(nogil=True, cache=True)
def _backward_scan(cum_st, cum_ts, lo_i, lo_j, hi_i, hi_j, bs, bt):
    """Walk the traversal path backward from (hi_i, hi_j) down to but not
    including (lo_i, lo_j); return the first feasible state, else (-1, -1).

    The forward path climbs j at fixed i until cum_ts[j] > cum_st[i], then
    steps i; the backward step inverts that rule.
    """
    n_j = cum_ts.shape[0] - 1
    i = hi_i
    j = hi_j
    while True:
        if i == lo_i and j == lo_j:
            # the segment excludes its lower boundary state
            return np.int64(-1), np.int64(-1)
        diff = cum_st[i] - cum_ts[j]
        if -bs <= diff <= bt:
            return i, j
        if i == 0:
            j -= 1
            continue
        if j == 0:
            i -= 1
            continue
        # arrival j at row i: first index with cum_ts[...] > cum_st[i-1]
        arr = np.searchsorted(cum_ts, cum_st[i - 1], side="right")
        if arr > n_j:
            arr = n_j
        if j - 1 >= arr:
            j -= 1
        else:
            i -= 1
        if i < lo_i or j < lo_j:
            return np.int64(-1), np.int64(-1)


def _prefix_recurse(cum_st, cum_ts, lo_i, lo_j, hi_i, hi_j, bs, bt,
                    threshold):
    """Last feasible path state in ((lo_i, lo_j), (hi_i, hi_j)], or None.

    Searches the right half before the left so the first hit is the global
    last; a feasible split state short-circuits the left recursion, and a
    half whose weight differences cannot meet the budgets is skipped.
    """
    len_i = hi_i - lo_i
    len_j = hi_j - lo_j
    if len_i <= 0 and len_j <= 0:
        return None
    if len_i < threshold and len_j < threshold:
        i, j = _backward_scan(cum_st, cum_ts, lo_i, lo_j, hi_i, hi_j,
                              np.int64(bs), np.int64(bt))
        return (int(i), int(j)) if i >= 0 else None
    n_i = len(cum_st) - 1
    n_j = len(cum_ts) - 1
    if len_i >= len_j:
        m = (lo_i + hi_i) // 2
        p = int(np.searchsorted(cum_ts, cum_st[m], side="right"))
        p = min(max(p, lo_j), hi_j)
        split = (m, p)
    else:
        n = (lo_j + hi_j) // 2
        q = int(np.searchsorted(cum_st, cum_ts[n], side="left"))
        q = min(max(q, lo_i), hi_i)
        split = (q, n)
    si, sj = split
    # right half: every diff is at least cum_st[si] - cum_ts[hi_j] and at
    # most cum_st[hi_i] - cum_ts[sj]
    if (cum_st[si] - cum_ts[hi_j] <= bt
            and cum_st[hi_i] - cum_ts[sj] >= -bs):
        res = _prefix_recurse(cum_st, cum_ts, si, sj, hi_i, hi_j, bs, bt,
                              threshold)
        if res is not None:
            return res
    diff_split = cum_st[si] - cum_ts[sj]
    if -bs <= diff_split <= bt:
        return (int(si), int(sj))
    if (cum_st[lo_i] - cum_ts[sj] <= bt
            and cum_st[si] - cum_ts[lo_j] >= -bs):
        return _prefix_recurse(cum_st, cum_ts, lo_i, lo_j, si, sj, bs, bt,
                               threshold)
    return None


def longest_feasible_prefixes(seq: SwapSequences,
                              threshold: int = 2000):
    """Longest feasible prefix pair (i, j): the last state of the
    simultaneous traversal satisfying -budget_s <= weight difference <=
    budget_t. Equals the sequential traversal result exactly; (0, 0) is
    always feasible."""
    res = _prefix_recurse(seq.cum_st, seq.cum_ts, 0, 0,
                          len(seq.cum_st) - 1, len(seq.cum_ts) - 1,
                          seq.budget_s, seq.budget_t, max(2, threshold))
    return res if res is not None else (0, 0)


def approve_and_apply_swaps(H: Hypergraph, P: PartitionState,
                            moves: ProposedMoves, cfg: PartitionConfig):
    """Approve a balanced subset of one sub-round's moves and apply it.

    Moves are bucketed per block pair. Block t's spare capacity
    (L_max - weight(t)) is floor-divided among the pairs proposing moves
    into t; each pair then approves the longest feasible prefixes of its
    two gain-sorted sequences. Returns (applied ProposedMoves, attributed
    gain sum). The resulting partition is balanced by construction.
    """
    if isinstance(moves, (list, tuple)):
        moves = ProposedMoves.from_moves(moves)
    n = len(moves)
    if n == 0:
        return ProposedMoves.empty(), 0
    if np.any(moves.sources == moves.targets):
        raise ValueError("a move's source and target blocks must differ")
    k = P.k
    key = moves.sources * k + moves.targets
    order = np.argsort(key, kind="stable")
    sorted_key = key[order]
    starts = np.flatnonzero(np.concatenate(([True], sorted_key[1:] != sorted_key[:-1])))
    bounds = np.concatenate((starts, [n]))
    pair_keys = sorted_key[starts]
    pair_t = pair_keys % k
    indegree = np.bincount(pair_t, minlength=k)
    spare = np.maximum(P.max_block_weight - P.block_weight, 0)
    budget = np.zeros(k, dtype=np.int64)
    nonzero = indegree > 0
    budget[nonzero] = spare[nonzero] // indegree[nonzero]

    slices = {}
    for pi in range(len(pair_keys)):
        s = int(pair_keys[pi]) // k
        t = int(pair_keys[pi]) % k
        slices[(s, t)] = order[bounds[pi]:bounds[pi + 1]]

    w = H.vertex_weight
    empty = np.zeros(0, dtype=np.int64)
    applied_chunks = []
    for (a, b) in sorted(slices.keys()):
        if a > b and (b, a) in slices:
            continue  # handled as the (b, a) pair's reverse side
        fwd = slices[(a, b)]
        rev = slices.get((b, a), empty)
        if a > b:
            a, b = b, a
            fwd, rev = rev, fwd
        mv_f = moves.vertices[fwd]
        mv_r = moves.vertices[rev]
        seq = SwapSequences.build(
            fwd, mv_f, moves.gains[fwd], w[mv_f],
            rev, mv_r, moves.gains[rev], w[mv_r],
            int(budget[a]), int(budget[b]))
        i, j = longest_feasible_prefixes(seq, cfg.swap_sequential_threshold)
        if i:
            applied_chunks.append(seq.idx_st[:i])
        if j:
            applied_chunks.append(seq.idx_ts[:j])
    if not applied_chunks:
        return ProposedMoves.empty(), 0
    app = np.concatenate(applied_chunks)
    applied = ProposedMoves(moves.vertices[app], moves.sources[app],
                            moves.targets[app], moves.gains[app])
    att = _apply_moves(applied.vertices, applied.sources, applied.targets,
                       H.incidence_offsets, H.incident_nets,
                       H.hyperedge_weight, P.pin_count, P.connectivity,
                       P.assignment, P.block_weight, H.vertex_weight)
    return applied, int(att)


@njit(nogil=True, cache=True)
def _activate(mv, inc_off, inc, pin_off, pins, last_scanned, last_activated,
              rnd):
    for idx in range(mv.shape[0]):
        v = mv[idx]
        for p in range(inc_off[v], inc_off[v + 1]):
            e = inc[p]
            if last_scanned[e] == rnd:
                continue
            last_scanned[e] = rnd
            for q in range(pin_off[e], pin_off[e + 1]):
                last_activated[pins[q]] = rnd


def lp_refine(H: Hypergraph, P: PartitionState, cfg: PartitionConfig,
              seed: int | None = None) -> int:
    """Refine P in place; returns the total connectivity improvement (>= 0).

    Runs up to refinement_rounds_per_level rounds. Round 1 scans all
    vertices; later rounds scan the sorted set of vertices touched by the
    previous round's applied moves. A sub-round whose attributed total is
    negative is reverted (moves undone, nothing activated), and the
    sub-round count for subsequent rounds of this level doubles, up to 16.
    """
    if seed is None:
        seed = seed_combine(cfg.seed, _SEED_DOMAIN)
    V = H.num_vertices
    sub_rounds = cfg.refinement_sub_rounds
    last_activated = np.full(V, -1, dtype=np.int64)
    last_scanned = np.full(H.num_hyperedges, -1, dtype=np.int64)
    total = 0
    for rnd in range(cfg.refinement_rounds_per_level):
        if rnd == 0:
            worklist = np.arange(V, dtype=np.int64)
        else:
            worklist = np.flatnonzero(last_activated == rnd - 1)
        if len(worklist) == 0:
            break
        plan = split_sub_rounds(worklist, seed_combine(seed, rnd), sub_rounds)
        applied_in_round = 0
        reverted = False
        for verts in plan:
            if len(verts) == 0:
                continue
            out_t = np.empty(len(verts), dtype=np.int64)
            out_g = np.empty(len(verts), dtype=np.int64)

            def work(lo: int, hi: int) -> None:
                _gain_chunk(verts, lo, hi, H.incidence_offsets,
                            H.incident_nets, H.hyperedge_weight,
                            P.pin_count, np.int64(P.k), P.assignment,
                            out_t, out_g)

            parallel.run_range(len(verts), work, grain=2048)
            movers = out_t >= 0
            if not movers.any():
                continue
            mset = ProposedMoves(verts[movers],
                                 P.assignment[verts[movers]].copy(),
                                 out_t[movers], out_g[movers])
            applied, att = approve_and_apply_swaps(H, P, mset, cfg)
            if len(applied) == 0:
                continue
            if att < 0:
                _apply_moves(applied.vertices, applied.targets,
                             applied.sources, H.incidence_offsets,
                             H.incident_nets, H.hyperedge_weight,
                             P.pin_count, P.connectivity, P.assignment,
                             P.block_weight, H.vertex_weight)
                reverted = True
            else:
                total += att
                applied_in_round += len(applied)
                _activate(applied.vertices, H.incidence_offsets,
                          H.incident_nets, H.pin_list_offsets, H.pins,
                          last_scanned, last_activated, np.int64(rnd))
        if reverted and sub_rounds < 16:
            sub_rounds = min(16, 2 * sub_rounds)
        if applied_in_round == 0:
            break
    return total
