"""Community-restricted clustering coarsening with deterministic approval.

Each pass splits the vertices into sub-rounds. Within a sub-round every
still-singleton vertex rates the clusters of its same-community neighbors
against frozen cluster weights and proposes the best one (ties broken by a
seeded hash of the vertex id). Proposals are approved synchronously: whole
clusters whose combined proposed weight fits are approved at once, the rest
are sorted by (cluster, vertex weight, vertex id) and approved in order
until the cap would be exceeded. Contraction then merges clusters, removes
size-1 hyperedges, and deduplicates identical hyperedges, summing weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import parallel
from .config import PartitionConfig
from .hypergraph import Clustering, Hypergraph, max_block_weight
from .primitives import GOLDEN, MASK64, _MIX1, _MIX2, _nb_fold, seed_combine, split_sub_rounds

_SEED_DOMAIN = 0x20


@dataclass
class CoarseningState:
    """Mutable state of one coarsening pass."""

    clustering: Clustering
    propositions: np.ndarray        # int64 per vertex, -1 = no proposal
    opportunistic_weight: np.ndarray  # int64 per cluster
    max_cluster_weight: int
    contraction_limit: int
    seed: int

    @classmethod
    def fresh(cls, H: Hypergraph, cfg: PartitionConfig, seed: int) -> "CoarseningState":
        cl = Clustering.singletons(H)
        cap = cluster_weight_cap(H, cfg)
        return cls(cl, np.full(H.num_vertices, -1, dtype=np.int64),
                   cl.cluster_weight.copy(), cap, cfg.contraction_limit(), seed)


def cluster_weight_cap(H: Hypergraph, cfg: PartitionConfig) -> int:
    """CW_max = min(block cap, total weight / contraction limit)."""
    lmax = max_block_weight(H.total_vertex_weight, cfg.k, cfg.epsilon_fraction())
    return min(lmax, H.total_vertex_weight // cfg.contraction_limit())


@njit(nogil=True, cache=True)
def _rating_chunk(verts, lo, hi, pin_off, pins, inc_off, inc, sizes,
                  ew, vw, comm, cluster_of, cluster_w, cw_max,
                  max_size, seed, out):
    n = cluster_of.shape[0]
    rating = np.zeros(n, dtype=np.float64)
    touched = np.empty(n, dtype=np.int64)
    ties = np.empty(n, dtype=np.int64)
    seed_h = _nb_fold(np.uint64(0), np.uint64(seed))
    for idx in range(lo, hi):
        u = verts[idx]
        out[idx] = -1
        if cluster_of[u] != u or cluster_w[u] != vw[u]:
            continue  # only true singletons propose
        cu = comm[u]
        nt = 0
        for p in range(inc_off[u], inc_off[u + 1]):
            e = inc[p]
            sz = sizes[e]
            if sz < 2 or sz > max_size:
                continue
            contrib = ew[e] / (sz - 1.0)
            for q in range(pin_off[e], pin_off[e + 1]):
                v = pins[q]
                if v == u or comm[v] != cu:
                    continue
                c = cluster_of[v]
                if rating[c] == 0.0:
                    touched[nt] = c
                    nt += 1
                rating[c] += contrib
        best = 0.0
        n_ties = 0
        for t in range(nt):
            c = touched[t]
            if cluster_w[c] + vw[u] > cw_max:
                continue
            r = rating[c]
            if r > best:
                best = r
                n_ties = 1
                ties[0] = c
            elif r == best and n_ties > 0:
                ties[n_ties] = c
                n_ties += 1
        if n_ties > 0:
            pick = _nb_fold(seed_h, np.uint64(u)) % np.uint64(n_ties)
            out[idx] = ties[np.int64(pick)]
        for t in range(nt):
            rating[touched[t]] = 0.0


def heavy_edge_rating(H: Hypergraph, state: CoarseningState,
                      communities: np.ndarray, u: int,
                      max_size: int = 1000):
    """Best cluster for vertex u, or None.

    Candidates are the clusters of same-community pins sharing a hyperedge
    with u (hyperedges above max_size pins skipped), each rated by the
    sum over those pins of weight(e) / (size(e) - 1). Clusters whose frozen
    weight plus c(u) would exceed the cap are skipped; ties between equal
    ratings are broken by a hash of (state.seed, u). Non-singleton u never
    proposes.
    """
    verts = np.array([u], dtype=np.int64)
    out = np.empty(1, dtype=np.int64)
    _rating_chunk(verts, 0, 1, H.pin_list_offsets, H.pins,
                  H.incidence_offsets, H.incident_nets, H.hyperedge_sizes(),
                  H.hyperedge_weight, H.vertex_weight, communities,
                  state.clustering.cluster_of, state.clustering.cluster_weight,
                  state.max_cluster_weight,
                  np.int64(max_size), np.uint64(state.seed & MASK64), out)
    return int(out[0]) if out[0] >= 0 else None


@njit(nogil=True, cache=True)
def _approve_sorted(order, targets, weights, verts, base_weight, cw_max,
                    approved):
    """Walk movers sorted by (cluster, weight, id); approve per cluster until
    the cap would be exceeded, reject the rest of that cluster."""
    i = 0
    n = order.shape[0]
    while i < n:
        t = targets[order[i]]
        cum = base_weight[t]
        j = i
        while j < n and targets[order[j]] == t:
            m = order[j]
            if cum + weights[m] <= cw_max:
                approved[m] = True
                cum += weights[m]
            else:
                break
            j += 1
        while j < n and targets[order[j]] == t:
            j += 1
        i = j


def coarsening_pass(H: Hypergraph, communities: np.ndarray,
                    cfg: PartitionConfig, seed: int | None = None) -> Clustering:
    """One synchronous clustering pass; returns the resulting clustering.

    Every vertex appears in exactly one sub-round and proposes at most once.
    No cluster weight ever exceeds the cap.
    """
    if seed is None:
        seed = seed_combine(cfg.seed, _SEED_DOMAIN)
    V = H.num_vertices
    state = CoarseningState.fresh(H, cfg, seed)
    cw_max = state.max_cluster_weight
    if cw_max < 2 or V == 0:
        return state.clustering  # nothing can merge under this cap
    cluster_of = state.clustering.cluster_of
    cluster_w = state.clustering.cluster_weight
    sizes = H.hyperedge_sizes()
    plan = split_sub_rounds(np.arange(V, dtype=np.int64), seed,
                            cfg.coarsening_sub_rounds)
    for verts in plan:
        if len(verts) == 0:
            continue
        out = np.empty(len(verts), dtype=np.int64)
        frozen_w = cluster_w.copy()

        def work(lo: int, hi: int) -> None:
            _rating_chunk(verts, lo, hi, H.pin_list_offsets, H.pins,
                          H.incidence_offsets, H.incident_nets, sizes,
                          H.hyperedge_weight, H.vertex_weight, communities,
                          cluster_of, frozen_w, cw_max,
                          np.int64(cfg.max_rated_hyperedge_size),
                          np.uint64(seed & MASK64), out)

        parallel.run_range(len(verts), work, grain=512)
        state.propositions[verts] = out
        movers = (out >= 0) & (out != cluster_of[verts])
        if not movers.any():
            continue
        mv = verts[movers]
        mv_t = out[movers]
        mv_w = H.vertex_weight[mv]

        # opportunistic weights: frozen committed + every proposed-in weight
        opportunistic = cluster_w.copy()
        np.add.at(opportunistic, mv_t, mv_w)
        np.maximum(state.opportunistic_weight, opportunistic,
                   out=state.opportunistic_weight)
        fast = opportunistic[mv_t] <= cw_max
        approved = np.zeros(len(mv), dtype=np.bool_)
        approved[fast] = True
        slow = np.flatnonzero(~fast)
        if len(slow):
            order = slow[np.lexsort((mv[slow], mv_w[slow], mv_t[slow]))]
            _approve_sorted(order, mv_t, mv_w, mv, cluster_w, cw_max,
                            approved)
        app = np.flatnonzero(approved)
        if len(app) == 0:
            continue
        cluster_of[mv[app]] = mv_t[app]
        np.add.at(cluster_w, mv_t[app], mv_w[app])
        np.add.at(cluster_w, mv[app], -mv_w[app])
    return state.clustering


@dataclass
class ContractionResult:
    coarse: Hypergraph
    vertex_map: np.ndarray     # fine vertex -> coarse vertex
    hyperedge_map: np.ndarray  # fine hyperedge -> coarse hyperedge, -1 if gone


@njit(nogil=True, cache=True)
def _remap_dedup_pins(lo, hi, pin_off, pins, vmap, tmp_pins, new_size,
                      edge_hash):
    """Per hyperedge: remap pins, sort, drop duplicates, hash the pin set.

    The hash is a commutative xor-fold of mix64(pin + 1), so it is
    independent of pin order by construction.
    """
    for e in range(lo, hi):
        a, b = pin_off[e], pin_off[e + 1]
        m = b - a
        buf = np.empty(m, dtype=np.int64)
        for i in range(m):
            buf[i] = vmap[pins[a + i]]
        buf = np.sort(buf)
        cnt = 0
        h = np.uint64(0)
        for i in range(m):
            if cnt > 0 and buf[i] == tmp_pins[a + cnt - 1]:
                continue
            tmp_pins[a + cnt] = buf[i]
            cnt += 1
            z = np.uint64(buf[i] + 1) + np.uint64(GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            h ^= z ^ (z >> np.uint64(31))
        new_size[e] = cnt
        edge_hash[e] = h


@njit(nogil=True, cache=True)
def _dedup_classes(order, edge_hash, new_size, pin_off, tmp_pins, rep_of):
    """Within runs of equal (hash, size), assign each edge the smallest-id
    edge with identical pins as its representative; order is sorted by
    (hash, size, id) ascending."""
    n = order.shape[0]
    reps = np.empty(n, dtype=np.int64)
    i = 0
    while i < n:
        j = i
        h = edge_hash[order[i]]
        s = new_size[order[i]]
        while j < n and edge_hash[order[j]] == h and new_size[order[j]] == s:
            j += 1
        n_reps = 0
        for t in range(i, j):
            e = order[t]
            assigned = False
            for r in range(n_reps):
                cand = reps[r]
                same = True
                for p in range(s):
                    if tmp_pins[pin_off[e] + p] != tmp_pins[pin_off[cand] + p]:
                        same = False
                        break
                if same:
                    rep_of[e] = cand
                    assigned = True
                    break
            if not assigned:
                rep_of[e] = e
                reps[n_reps] = e
                n_reps += 1
        i = j


def contract_hypergraph(H: Hypergraph, clustering) -> ContractionResult:
    """Merge clusters into coarse vertices; see module docstring for rules."""
    cluster_of = getattr(clustering, "cluster_of", clustering)
    cluster_of = np.ascontiguousarray(cluster_of, dtype=np.int64)
    used, vmap = np.unique(cluster_of, return_inverse=True)
    vmap = vmap.astype(np.int64)
    nV = len(used)
    vw = np.zeros(nV, dtype=np.int64)
    np.add.at(vw, vmap, H.vertex_weight)

    E = H.num_hyperedges
    tmp_pins = np.empty(H.num_pins, dtype=np.int64)
    new_size = np.zeros(E, dtype=np.int64)
    edge_hash = np.zeros(E, dtype=np.uint64)

    def work(lo: int, hi: int) -> None:
        _remap_dedup_pins(lo, hi, H.pin_list_offsets, H.pins, vmap,
                          tmp_pins, new_size, edge_hash)

    parallel.run_range(E, work, grain=512)

    survivors = np.flatnonzero(new_size >= 2)
    hyperedge_map = np.full(E, -1, dtype=np.int64)
    if len(survivors) == 0:
        coarse = Hypergraph.from_csr(nV, np.zeros(1, dtype=np.int64),
                                     np.zeros(0, dtype=np.int64), vw,
                                     np.zeros(0, dtype=np.int64))
        return ContractionResult(coarse, vmap, hyperedge_map)

    order = survivors[np.lexsort((survivors,
                                  new_size[survivors],
                                  edge_hash[survivors]))]
    rep_of = np.full(E, -1, dtype=np.int64)
    _dedup_classes(order, edge_hash, new_size, H.pin_list_offsets,
                   tmp_pins, rep_of)
    reps = np.sort(np.unique(rep_of[survivors]))
    coarse_idx = np.full(E, -1, dtype=np.int64)
    coarse_idx[reps] = np.arange(len(reps), dtype=np.int64)
    hyperedge_map[survivors] = coarse_idx[rep_of[survivors]]

    new_ew = np.zeros(len(reps), dtype=np.int64)
    np.add.at(new_ew, hyperedge_map[survivors], H.hyperedge_weight[survivors])

    new_off = np.zeros(len(reps) + 1, dtype=np.int64)
    np.cumsum(new_size[reps], out=new_off[1:])
    new_pins = np.empty(int(new_off[-1]), dtype=np.int64)
    for i, e in enumerate(reps):
        s = new_size[e]
        new_pins[new_off[i]:new_off[i] + s] = \
            tmp_pins[H.pin_list_offsets[e]:H.pin_list_offsets[e] + s]
    coarse = Hypergraph.from_csr(nV, new_off, new_pins, vw, new_ew)
    return ContractionResult(coarse, vmap, hyperedge_map)


def coarsen_to_limit(H: Hypergraph, communities: np.ndarray,
                     cfg: PartitionConfig) -> list[ContractionResult]:
    """Coarsen until the vertex count reaches the contraction limit or a
    pass shrinks it by less than the configured fraction."""
    hierarchy: list[ContractionResult] = []
    limit = cfg.contraction_limit()
    cur = H
    comm = np.ascontiguousarray(communities, dtype=np.int64)
    level = 0
    while cur.num_vertices > limit:
        cl = coarsening_pass(cur, comm, cfg,
                             seed=seed_combine(cfg.seed, _SEED_DOMAIN, level))
        n_clusters = len(np.unique(cl.cluster_of))
        if n_clusters > (1.0 - cfg.coarsening_min_reduction) * cur.num_vertices:
            break
        res = contract_hypergraph(cur, cl)
        coarse_comm = np.zeros(res.coarse.num_vertices, dtype=np.int64)
        coarse_comm[res.vertex_map] = comm
        hierarchy.append(res)
        cur = res.coarse
        comm = coarse_comm
        level += 1
    return hierarchy
