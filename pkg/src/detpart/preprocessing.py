"""Community detection used to restrict coarsening.

The hypergraph is star-expanded into a bipartite graph (one node per vertex,
one per hyperedge), and a synchronous variant of Louvain runs on it: each
sub-round computes best moves against frozen state, then applies them all at
once. Volume updates are applied in a fixed sorted order so the floating
point community volumes are bit-identical for any thread count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numba import njit

from . import parallel
from .config import PartitionConfig
from .hypergraph import Hypergraph
from .primitives import seed_combine, split_sub_rounds

_SEED_DOMAIN = 0x10


@dataclass
class BipartiteGraph:
    """Undirected weighted graph in CSR form; self-loops stored once.

    A self-loop entry (u, u, w) contributes 2*w to vol(u), matching the
    convention that a contracted community's internal weight appears once
    as a loop but twice in its volume.
    """

    num_nodes: int
    num_vertex_nodes: int
    offsets: np.ndarray      # int64, num_nodes + 1
    targets: np.ndarray      # int64
    weights: np.ndarray      # float64, positive
    node_volume: np.ndarray  # float64
    total_volume: float

    def neighbors(self, u: int):
        lo, hi = self.offsets[u], self.offsets[u + 1]
        return self.targets[lo:hi], self.weights[lo:hi]


@dataclass
class CommunityState:
    community_of: np.ndarray      # int64 per node
    community_volume: np.ndarray  # float64, indexed by community id

    @classmethod
    def singletons(cls, G: BipartiteGraph) -> "CommunityState":
        return cls(np.arange(G.num_nodes, dtype=np.int64),
                   G.node_volume.copy())


@dataclass(frozen=True)
class VolumeUpdate:
    community: int
    node: int
    delta: float


def build_bipartite(H: Hypergraph, cfg: PartitionConfig) -> BipartiteGraph:
    """Star-expand H: vertices are nodes 0..|V|-1, hyperedges |V|..|V|+|E|-1.

    Pin (v, e) becomes an edge between v and its hyperedge node. Edge weight
    is weight(e) per pin, or weight(e) * degree(v) / size(e) when the median
    hyperedge size reaches the configured threshold (dense instances).
    """
    V, E = H.num_vertices, H.num_hyperedges
    n = V + E
    sizes = H.hyperedge_sizes()
    degrees = np.diff(H.incidence_offsets)
    use_nonuniform = (
        E > 0 and float(np.median(sizes)) >= cfg.nonuniform_edge_weight_median_size
    )
    eids = np.repeat(np.arange(E, dtype=np.int64), sizes)
    if use_nonuniform:
        wp = (H.hyperedge_weight[eids].astype(np.float64)
              * degrees[H.pins] / sizes[eids])
    else:
        wp = H.hyperedge_weight[eids].astype(np.float64)

    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.concatenate([degrees, sizes]), out=offsets[1:])
    pin_order = np.argsort(H.pins, kind="stable")
    targets = np.concatenate([V + eids[pin_order], H.pins])
    weights = np.concatenate([wp[pin_order], wp])

    row_sizes = np.diff(offsets)
    row_ids = np.repeat(np.arange(n, dtype=np.int64), row_sizes)
    vol = np.bincount(row_ids, weights=weights, minlength=n)
    return BipartiteGraph(n, V, offsets, targets, weights,
                          vol, float(vol.sum()))


@njit(nogil=True, cache=True)
def _louvain_gain_chunk(nodes, lo, hi, offsets, targets, weights,
                        node_vol, comm_of, comm_vol, total_vol,
                        out_target):
    n_comm = comm_vol.shape[0]
    w_to = np.zeros(n_comm, dtype=np.float64)
    touched = np.empty(n_comm, dtype=np.int64)
    for idx in range(lo, hi):
        u = nodes[idx]
        a = comm_of[u]
        nt = 0
        for p in range(offsets[u], offsets[u + 1]):
            v = targets[p]
            if v == u:
                continue  # self-loop weight cancels out of the gain
            c = comm_of[v]
            if w_to[c] == 0.0:
                touched[nt] = c
                nt += 1
            w_to[c] += weights[p]
        vol_u = node_vol[u]
        w_own = w_to[a]
        best_gain = 0.0
        best_c = np.int64(-1)
        for t in range(nt):
            c = touched[t]
            if c == a:
                continue
            gain = (2.0 * (w_to[c] - w_own) / total_vol
                    - 2.0 * vol_u * (comm_vol[c] - comm_vol[a] + vol_u)
                    / (total_vol * total_vol))
            if gain > best_gain or (gain == best_gain and best_c >= 0 and c < best_c):
                best_gain = gain
                best_c = c
        out_target[idx] = best_c
        for t in range(nt):
            w_to[touched[t]] = 0.0


def apply_volume_updates(state: CommunityState,
                         updates: Iterable[VolumeUpdate]) -> None:
    """Apply volume deltas in a canonical order: all additions sorted by
    (community, node), then all subtractions sorted the same way. The order
    pins the floating point result."""
    ups = list(updates)
    if not ups:
        return
    comm = np.array([u.community for u in ups], dtype=np.int64)
    node = np.array([u.node for u in ups], dtype=np.int64)
    delta = np.array([u.delta for u in ups], dtype=np.float64)
    _apply_volume_deltas(state.community_volume, comm, node, delta)


def _apply_volume_deltas(comm_vol, comm, node, delta) -> None:
    pos = delta > 0
    for mask in (pos, ~pos):
        if not mask.any():
            continue
        order = np.lexsort((node[mask], comm[mask]))
        np.add.at(comm_vol, comm[mask][order], delta[mask][order])


def louvain_sync_round(G: BipartiteGraph, state: CommunityState,
                       seed: int, sub_rounds: int):
    """One synchronous pass over all nodes; returns (state, moved_count).

    Nodes are split into sub-rounds deterministically; within a sub-round
    every best move is computed against the same frozen community state,
    then all moves and volume updates apply at once.
    """
    plan = split_sub_rounds(np.arange(G.num_nodes, dtype=np.int64),
                            seed, sub_rounds)
    moved_total = 0
    for nodes in plan:
        if len(nodes) == 0:
            continue
        out_target = np.empty(len(nodes), dtype=np.int64)

        def work(lo: int, hi: int) -> None:
            _louvain_gain_chunk(nodes, lo, hi, G.offsets, G.targets,
                                G.weights, G.node_volume, state.community_of,
                                state.community_volume, G.total_volume,
                                out_target)

        parallel.run_range(len(nodes), work, grain=2048)
        movers = out_target >= 0
        m = int(movers.sum())
        if m == 0:
            continue
        mv_nodes = nodes[movers]
        mv_to = out_target[movers]
        mv_from = state.community_of[mv_nodes]
        vols = G.node_volume[mv_nodes]
        comm = np.concatenate([mv_to, mv_from])
        node = np.concatenate([mv_nodes, mv_nodes])
        delta = np.concatenate([vols, -vols])
        _apply_volume_deltas(state.community_volume, comm, node, delta)
        state.community_of[mv_nodes] = mv_to
        moved_total += m
    return state, moved_total


def modularity(G: BipartiteGraph, state: CommunityState) -> float:
    """Coverage minus expected coverage; recomputed from scratch (oracle)."""
    if G.total_volume <= 0:
        return 0.0
    n = G.num_nodes
    row_ids = np.repeat(np.arange(n, dtype=np.int64), np.diff(G.offsets))
    same = state.community_of[row_ids] == state.community_of[G.targets]
    loops = G.targets == row_ids
    cov = float(G.weights[same].sum() + G.weights[same & loops].sum())
    vol_c = np.bincount(state.community_of, weights=G.node_volume,
                        minlength=n)
    t = G.total_volume
    return cov / t - float((vol_c ** 2).sum()) / (t * t)


@njit(nogil=True, cache=True)
def _contract_adjacency(order, comm_starts, new_comm, offsets, targets,
                        weights, out_off, out_to, out_w):
    """Aggregate node adjacencies per community; returns entry count.

    Communities are processed in ascending id order, members in ascending
    node id order, so the float sums have one fixed order.
    """
    n_comm = comm_starts.shape[0] - 1
    acc = np.zeros(n_comm, dtype=np.float64)
    stamp = np.full(n_comm, -1, dtype=np.int64)
    touched = np.empty(n_comm, dtype=np.int64)
    pos = 0
    for c in range(n_comm):
        loop_twice = 0.0
        nt = 0
        for m in range(comm_starts[c], comm_starts[c + 1]):
            u = order[m]
            for p in range(offsets[u], offsets[u + 1]):
                v = targets[p]
                w = weights[p]
                cv = new_comm[v]
                if cv == c:
                    # intra pair weight arrives from both endpoints; a fine
                    # self-loop arrives once, so count it twice here and
                    # halve the total below
                    if v == u:
                        loop_twice += 2.0 * w
                    else:
                        loop_twice += w
                else:
                    if stamp[cv] != c:
                        stamp[cv] = c
                        touched[nt] = cv
                        nt += 1
                        acc[cv] = 0.0
                    acc[cv] += w
        if loop_twice > 0.0:
            touched[nt] = c
            acc[c] = 0.5 * loop_twice
            nt += 1
        row = np.sort(touched[:nt])
        for i in range(nt):
            out_to[pos] = row[i]
            out_w[pos] = acc[row[i]]
            pos += 1
        out_off[c + 1] = pos
    return pos


def contract_graph(G: BipartiteGraph, state: CommunityState):
    """Collapse communities into single nodes.

    Returns (coarse_graph, node_map) where node_map[u] is the coarse node id
    of u's community (ids dense, ordered by ascending community id). Volumes
    are summed from member volumes, so total volume is preserved exactly up
    to float association.
    """
    used, new_comm = np.unique(state.community_of, return_inverse=True)
    n_comm = len(used)
    order = np.argsort(new_comm, kind="stable")
    counts = np.bincount(new_comm, minlength=n_comm)
    comm_starts = np.zeros(n_comm + 1, dtype=np.int64)
    np.cumsum(counts, out=comm_starts[1:])

    cap = len(G.targets) + n_comm
    out_off = np.zeros(n_comm + 1, dtype=np.int64)
    out_to = np.empty(cap, dtype=np.int64)
    out_w = np.empty(cap, dtype=np.float64)
    n_entries = _contract_adjacency(order.astype(np.int64), comm_starts,
                                    new_comm.astype(np.int64), G.offsets,
                                    G.targets, G.weights, out_off, out_to,
                                    out_w)
    vol = np.zeros(n_comm, dtype=np.float64)
    _sum_by_group(order.astype(np.int64), comm_starts, G.node_volume, vol)
    coarse = BipartiteGraph(
        n_comm,
        n_comm,  # vertex/hyperedge distinction is gone after one level
        out_off,
        out_to[:n_entries].copy(),
        out_w[:n_entries].copy(),
        vol,
        float(vol.sum()),
    )
    return coarse, new_comm.astype(np.int64)


@njit(nogil=True, cache=True)
def _sum_by_group(order, starts, values, out):
    for g in range(starts.shape[0] - 1):
        acc = 0.0
        for m in range(starts[g], starts[g + 1]):
            acc += values[order[m]]
        out[g] = acc


def detect_communities(H: Hypergraph, cfg: PartitionConfig) -> np.ndarray:
    """Louvain with contraction levels; returns a community id per vertex.

    Hyperedge nodes participate in the clustering but are dropped from the
    result. Ids are dense in [0, number of communities).
    """
    if H.num_vertices == 0:
        return np.zeros(0, dtype=np.int64)
    G = build_bipartite(H, cfg)
    if G.total_volume <= 0:
        return np.arange(H.num_vertices, dtype=np.int64)

    maps: list[np.ndarray] = []
    g = G
    for level in range(cfg.louvain_max_levels):
        state = CommunityState.singletons(g)
        level_moves = 0
        for r in range(cfg.preprocessing_rounds):
            _, moved = louvain_sync_round(
                g, state,
                seed_combine(cfg.seed, _SEED_DOMAIN, level, r),
                cfg.preprocessing_sub_rounds)
            level_moves += moved
            if moved == 0:
                break
        if level_moves == 0:
            break
        coarse, node_map = contract_graph(g, state)
        maps.append(node_map)
        stalled = coarse.num_nodes >= g.num_nodes
        g = coarse
        if stalled:
            break

    labels = np.arange(g.num_nodes, dtype=np.int64)
    for node_map in reversed(maps):
        labels = labels[node_map]
    vertex_labels = labels[:H.num_vertices]
    _, dense = np.unique(vertex_labels, return_inverse=True)
    return dense.astype(np.int64)
