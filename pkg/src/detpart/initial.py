"""Initial partitioning of the coarsest hypergraph.

Recursive bipartitioning: each split runs a portfolio of four sequential
flat 2-way algorithms (greedy balanced random assignment, BFS region
growing, greedy hyperedge growing, size-constrained label propagation),
20 repetitions each. Candidates carry sequential tags so the winner is
independent of completion order; the winner gets a few rounds of FM and
the two sides recurse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import parallel
from .config import PartitionConfig
from .hypergraph import (
    Hypergraph,
    InfeasibleBalanceError,
    PartitionState,
    connectivity_metric,
    max_block_weight,
)
from .primitives import det_shuffle, seed_combine

_SEED_DOMAIN = 0x30

ALGORITHM_COUNT = 4


@dataclass
class BipartitionCandidate:
    assignment: np.ndarray
    connectivity: int
    imbalance: int  # total weight above the side caps; 0 means balanced
    tag: int


def overload(H: Hypergraph, assignment, caps) -> int:
    w0 = int(H.vertex_weight[assignment == 0].sum())
    w1 = H.total_vertex_weight - w0
    return max(0, w0 - int(caps[0])) + max(0, w1 - int(caps[1]))


def side_caps(total_weight: int, fractions, eps_prime: float):
    """Per-side weight caps for one split: at least the ceil of the
    proportional target (so the caps always admit some assignment), at most
    (1 + eps') times it."""
    f0, f1 = fractions
    fs = f0 + f1
    caps = []
    for f in (f0, f1):
        target = -(-total_weight * f // fs)
        caps.append(max(target, int((1.0 + eps_prime) * (total_weight * f / fs))))
    return caps[0], caps[1]


@njit(nogil=True, cache=True)
def _flat_balance(order, vw, cap0, cap1, out):
    """Greedy balanced assignment in shuffled order: place each vertex on
    the side where it fits, preferring the larger remaining capacity."""
    w0 = np.int64(0)
    w1 = np.int64(0)
    for i in range(order.shape[0]):
        v = order[i]
        c = vw[v]
        fits0 = w0 + c <= cap0
        fits1 = w1 + c <= cap1
        if fits0 and not fits1:
            side = 0
        elif fits1 and not fits0:
            side = 1
        else:
            side = 0 if cap0 - w0 >= cap1 - w1 else 1
        if side == 0:
            out[v] = 0
            w0 += c
        else:
            out[v] = 1
            w1 += c


@njit(nogil=True, cache=True)
def _flat_bfs(order, pin_off, pins, inc_off, inc, vw, target0, cap0, out):
    """Grow block 0 breadth-first from seeds until it reaches target weight;
    dequeued vertices that would exceed the cap stay in block 1."""
    n = order.shape[0]
    for i in range(n):
        out[order[i]] = 1
    E = pin_off.shape[0] - 1
    visited = np.zeros(n, dtype=np.uint8)
    edge_seen = np.zeros(E, dtype=np.uint8)
    queue = np.empty(n, dtype=np.int64)
    qh = 0
    qt = 0
    oi = 0
    w0 = np.int64(0)
    while w0 < target0:
        if qh == qt:
            while oi < n and visited[order[oi]]:
                oi += 1
            if oi == n:
                break
            v = order[oi]
            visited[v] = 1
            queue[qt] = v
            qt += 1
        v = queue[qh]
        qh += 1
        if w0 + vw[v] <= cap0:
            out[v] = 0
            w0 += vw[v]
            for p in range(inc_off[v], inc_off[v + 1]):
                e = inc[p]
                if edge_seen[e]:
                    continue
                edge_seen[e] = 1
                for q in range(pin_off[e], pin_off[e + 1]):
                    u = pins[q]
                    if not visited[u]:
                        visited[u] = 1
                        queue[qt] = u
                        qt += 1


@njit(nogil=True, cache=True)
def _heap_push(hw, he, hn, w, e):
    i = hn
    hw[i] = w
    he[i] = e
    while i > 0:
        p = (i - 1) >> 1
        if hw[i] > hw[p] or (hw[i] == hw[p] and he[i] < he[p]):
            hw[i], hw[p] = hw[p], hw[i]
            he[i], he[p] = he[p], he[i]
            i = p
        else:
            break
    return hn + 1


@njit(nogil=True, cache=True)
def _heap_pop(hw, he, hn):
    w = hw[0]
    e = he[0]
    hn -= 1
    hw[0] = hw[hn]
    he[0] = he[hn]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        m = i
        if l < hn and (hw[l] > hw[m] or (hw[l] == hw[m] and he[l] < he[m])):
            m = l
        if r < hn and (hw[r] > hw[m] or (hw[r] == hw[m] and he[r] < he[m])):
            m = r
        if m == i:
            break
        hw[i], hw[m] = hw[m], hw[i]
        he[i], he[m] = he[m], he[i]
        i = m
    return w, e, hn


@njit(nogil=True, cache=True)
def _flat_greedy_he(order, pin_off, pins, inc_off, inc, ew, vw,
                    target0, cap0, out):
    """Grow block 0 by absorbing whole hyperedges, heaviest first (ties to
    the smaller id). An edge that no longer fits is dropped for good since
    block 0 only grows."""
    n = order.shape[0]
    for i in range(n):
        out[order[i]] = 1
    E = pin_off.shape[0] - 1
    pushed = np.zeros(E, dtype=np.uint8)
    hw = np.empty(E + 1, dtype=np.int64)
    he = np.empty(E + 1, dtype=np.int64)
    hn = 0
    oi = 0
    w0 = np.int64(0)
    while w0 < target0:
        if hn == 0:
            while oi < n and out[order[oi]] == 0:
                oi += 1
            if oi == n:
                break
            v = order[oi]
            if w0 + vw[v] > cap0:
                oi += 1
                continue
            out[v] = 0
            w0 += vw[v]
            for p in range(inc_off[v], inc_off[v + 1]):
                e = inc[p]
                if not pushed[e]:
                    pushed[e] = 1
                    hn = _heap_push(hw, he, hn, ew[e], e)
            continue
        _, e, hn = _heap_pop(hw, he, hn)
        cost = np.int64(0)
        for q in range(pin_off[e], pin_off[e + 1]):
            if out[pins[q]] == 1:
                cost += vw[pins[q]]
        if cost == 0:
            continue
        if w0 + cost > cap0:
            continue
        for q in range(pin_off[e], pin_off[e + 1]):
            u = pins[q]
            if out[u] == 1:
                out[u] = 0
                w0 += vw[u]
                for p in range(inc_off[u], inc_off[u + 1]):
                    e2 = inc[p]
                    if not pushed[e2]:
                        pushed[e2] = 1
                        hn = _heap_push(hw, he, hn, ew[e2], e2)


@njit(nogil=True, cache=True)
def _flat_label_prop(order, pin_off, pins, inc_off, inc, ew, vw,
                     cap0, cap1, out, sweeps):
    """Greedy single-vertex moves in shuffled order, immediate application,
    capped block weights; stops when a sweep moves nothing."""
    n = order.shape[0]
    E = pin_off.shape[0] - 1
    phi = np.zeros((E, 2), dtype=np.int64)
    for e in range(E):
        for q in range(pin_off[e], pin_off[e + 1]):
            phi[e, out[pins[q]]] += 1
    w = np.zeros(2, dtype=np.int64)
    for i in range(n):
        w[out[order[i]]] += vw[order[i]]
    caps = np.empty(2, dtype=np.int64)
    caps[0] = cap0
    caps[1] = cap1
    for _ in range(sweeps):
        moved = 0
        for i in range(n):
            v = order[i]
            s = out[v]
            t = 1 - s
            g = np.int64(0)
            for p in range(inc_off[v], inc_off[v + 1]):
                e = inc[p]
                if phi[e, s] == 1:
                    g += ew[e]
                if phi[e, t] == 0:
                    g -= ew[e]
            if g > 0 and w[t] + vw[v] <= caps[t]:
                for p in range(inc_off[v], inc_off[v + 1]):
                    e = inc[p]
                    phi[e, s] -= 1
                    phi[e, t] += 1
                w[s] -= vw[v]
                w[t] += vw[v]
                out[v] = t
                moved += 1
        if moved == 0:
            break


def flat_bipartition(H: Hypergraph, algorithm_id: int, repetition_seed: int,
                     eps_prime: float, *, fractions=(1, 1), caps=None,
                     tag: int = 0) -> BipartitionCandidate:
    """One sequential flat 2-way partition; pure function of its arguments."""
    if not 0 <= algorithm_id < ALGORITHM_COUNT:
        raise ValueError("unknown algorithm id")
    V = H.num_vertices
    W = H.total_vertex_weight
    if caps is None:
        caps = side_caps(W, fractions, eps_prime)
    f0, f1 = fractions
    target0 = W * f0 // (f0 + f1)
    order = det_shuffle(np.arange(V, dtype=np.int64), repetition_seed)
    out = np.ones(V, dtype=np.int64)
    if algorithm_id == 0:
        _flat_balance(order, H.vertex_weight, caps[0], caps[1], out)
    elif algorithm_id == 1:
        _flat_bfs(order, H.pin_list_offsets, H.pins, H.incidence_offsets,
                  H.incident_nets, H.vertex_weight, target0, caps[0], out)
    elif algorithm_id == 2:
        _flat_greedy_he(order, H.pin_list_offsets, H.pins,
                        H.incidence_offsets, H.incident_nets,
                        H.hyperedge_weight, H.vertex_weight,
                        target0, caps[0], out)
    else:
        _flat_balance(order, H.vertex_weight, caps[0], caps[1], out)
        _flat_label_prop(order, H.pin_list_offsets, H.pins,
                         H.incidence_offsets, H.incident_nets,
                         H.hyperedge_weight, H.vertex_weight,
                         caps[0], caps[1], out, 5)
    return BipartitionCandidate(out, connectivity_metric(H, out),
                                overload(H, out, caps), tag)


def select_best(candidates) -> BipartitionCandidate:
    """Lexicographic minimum over (unbalanced?, connectivity, imbalance, tag)."""
    items = list(candidates)
    if not items:
        raise ValueError("no candidates")
    return min(items, key=lambda c: (c.imbalance > 0, c.connectivity,
                                     c.imbalance, c.tag))


@njit(nogil=True, cache=True)
def _fm_push(hg, hv, hn, g, v):
    i = hn
    hg[i] = g
    hv[i] = v
    while i > 0:
        p = (i - 1) >> 1
        if hg[i] > hg[p] or (hg[i] == hg[p] and hv[i] < hv[p]):
            hg[i], hg[p] = hg[p], hg[i]
            hv[i], hv[p] = hv[p], hv[i]
            i = p
        else:
            break
    return hn + 1


@njit(nogil=True, cache=True)
def _fm2way_kernel(pin_off, pins, inc_off, inc, ew, vw, a,
                   cap0, cap1, max_rounds):
    """Classic 2-way FM with best-prefix rollback.

    Each round unlocks everything, then repeatedly moves the feasible vertex
    with the highest gain (ties to the smaller id), locking it. The best
    (connectivity, overload) prefix is restored at round end; rounds stop
    early when one brings no improvement. Fully sequential; all ties and
    float-free arithmetic make it a pure function of its inputs.
    """
    V = a.shape[0]
    E = pin_off.shape[0] - 1
    phi = np.zeros((E, 2), dtype=np.int64)
    max_edge = 1
    for e in range(E):
        sz = pin_off[e + 1] - pin_off[e]
        if sz > max_edge:
            max_edge = sz
        for q in range(pin_off[e], pin_off[e + 1]):
            phi[e, a[pins[q]]] += 1
    w = np.zeros(2, dtype=np.int64)
    for v in range(V):
        w[a[v]] += vw[v]
    caps = np.empty(2, dtype=np.int64)
    caps[0] = cap0
    caps[1] = cap1
    conn = np.int64(0)
    for e in range(E):
        if phi[e, 0] > 0 and phi[e, 1] > 0:
            conn += ew[e]
    over = max(np.int64(0), w[0] - caps[0]) + max(np.int64(0), w[1] - caps[1])

    gain = np.zeros(V, dtype=np.int64)
    locked = np.zeros(V, dtype=np.uint8)
    applied = np.empty(V, dtype=np.int64)
    tmp_old = np.empty(max_edge, dtype=np.int64)
    scratch_g = np.empty(V, dtype=np.int64)
    scratch_v = np.empty(V, dtype=np.int64)
    deferred = np.zeros(V, dtype=np.uint8)

    for _ in range(max_rounds):
        start_conn = conn
        start_over = over
        for v in range(V):
            locked[v] = 0
            s = a[v]
            g = np.int64(0)
            for p in range(inc_off[v], inc_off[v + 1]):
                e = inc[p]
                if phi[e, s] == 1:
                    g += ew[e]
                if phi[e, 1 - s] == 0:
                    g -= ew[e]
            gain[v] = g
        cap_h = 2 * V + 16
        hg = np.empty(cap_h, dtype=np.int64)
        hv = np.empty(cap_h, dtype=np.int64)
        hn = 0
        for v in range(V):
            hn = _fm_push(hg, hv, hn, gain[v], v)
        n_applied = 0
        best_prefix = 0
        best_conn = conn
        best_over = over
        while hn > 0:
            sel = np.int64(-1)
            ns = 0
            while hn > 0:
                g = hg[0]
                v = hv[0]
                hn -= 1
                hg[0] = hg[hn]
                hv[0] = hv[hn]
                i = 0
                while True:
                    l = 2 * i + 1
                    r = l + 1
                    m = i
                    if l < hn and (hg[l] > hg[m] or (hg[l] == hg[m] and hv[l] < hv[m])):
                        m = l
                    if r < hn and (hg[r] > hg[m] or (hg[r] == hg[m] and hv[r] < hv[m])):
                        m = r
                    if m == i:
                        break
                    hg[i], hg[m] = hg[m], hg[i]
                    hv[i], hv[m] = hv[m], hv[i]
                    i = m
                if locked[v] or g != gain[v]:
                    continue
                t = 1 - a[v]
                if w[t] + vw[v] <= caps[t]:
                    sel = v
                    break
                # a vertex can sit in the heap several times with the same
                # fresh gain (it oscillated back); defer one copy only
                if deferred[v] == 0:
                    deferred[v] = 1
                    scratch_g[ns] = g
                    scratch_v[ns] = v
                    ns += 1
            for i2 in range(ns):
                if hn + 1 > cap_h:
                    new_cap = 2 * cap_h
                    nhg = np.empty(new_cap, dtype=np.int64)
                    nhv = np.empty(new_cap, dtype=np.int64)
                    for j in range(hn):
                        nhg[j] = hg[j]
                        nhv[j] = hv[j]
                    hg = nhg
                    hv = nhv
                    cap_h = new_cap
                hn = _fm_push(hg, hv, hn, scratch_g[i2], scratch_v[i2])
                deferred[scratch_v[i2]] = 0
            if sel < 0:
                break
            v = sel
            s = a[v]
            t = 1 - s
            for p in range(inc_off[v], inc_off[v + 1]):
                e = inc[p]
                lo = pin_off[e]
                hi = pin_off[e + 1]
                cnt = 0
                for q in range(lo, hi):
                    u = pins[q]
                    au = a[u]
                    old = np.int64(0)
                    if phi[e, au] == 1:
                        old += ew[e]
                    if phi[e, 1 - au] == 0:
                        old -= ew[e]
                    tmp_old[cnt] = old
                    cnt += 1
                if phi[e, t] == 0:
                    conn += ew[e]
                phi[e, s] -= 1
                phi[e, t] += 1
                if phi[e, s] == 0:
                    conn -= ew[e]
                cnt = 0
                for q in range(lo, hi):
                    u = pins[q]
                    if u != v and locked[u] == 0:
                        au = a[u]
                        new = np.int64(0)
                        if phi[e, au] == 1:
                            new += ew[e]
                        if phi[e, 1 - au] == 0:
                            new -= ew[e]
                        d = new - tmp_old[cnt]
                        if d != 0:
                            gain[u] += d
                            if hn + 1 > cap_h:
                                new_cap = 2 * cap_h
                                nhg = np.empty(new_cap, dtype=np.int64)
                                nhv = np.empty(new_cap, dtype=np.int64)
                                for j in range(hn):
                                    nhg[j] = hg[j]
                                    nhv[j] = hv[j]
                                hg = nhg
                                hv = nhv
                                cap_h = new_cap
                            hn = _fm_push(hg, hv, hn, gain[u], u)
                    cnt += 1
            a[v] = t
            w[s] -= vw[v]
            w[t] += vw[v]
            locked[v] = 1
            applied[n_applied] = v
            n_applied += 1
            over = max(np.int64(0), w[0] - caps[0]) + max(np.int64(0), w[1] - caps[1])
            if conn < best_conn or (conn == best_conn and over < best_over):
                best_conn = conn
                best_over = over
                best_prefix = n_applied
        for i2 in range(n_applied - 1, best_prefix - 1, -1):
            v = applied[i2]
            s = a[v]
            t = 1 - s
            for p in range(inc_off[v], inc_off[v + 1]):
                e = inc[p]
                if phi[e, t] == 0:
                    conn += ew[e]
                phi[e, s] -= 1
                phi[e, t] += 1
                if phi[e, s] == 0:
                    conn -= ew[e]
            a[v] = t
            w[s] -= vw[v]
            w[t] += vw[v]
        over = max(np.int64(0), w[0] - caps[0]) + max(np.int64(0), w[1] - caps[1])
        conn = best_conn
        if best_conn == start_conn and best_over == start_over:
            break
    return conn, over


def fm2way(H: Hypergraph, assignment, caps=None, rounds: int = 3):
    """FM polish of a 2-way partition; returns (assignment, connectivity,
    overload). Never worse than the input in (connectivity, overload)."""
    a = np.ascontiguousarray(assignment, dtype=np.int64).copy()
    if caps is None:
        cap = max_block_weight(H.total_vertex_weight, 2, 0.03)
        caps = (cap, cap)
    conn, over = _fm2way_kernel(H.pin_list_offsets, H.pins,
                                H.incidence_offsets, H.incident_nets,
                                H.hyperedge_weight, H.vertex_weight, a,
                                np.int64(caps[0]), np.int64(caps[1]),
                                np.int64(rounds))
    return a, int(conn), int(over)


def extract_side(H: Hypergraph, assignment, side: int):
    """Sub-hypergraph induced by one side of a 2-way partition.

    Drops hyperedges with fewer than two pins inside the side; weights are
    preserved. Returns (sub_hypergraph, original vertex ids).
    """
    a = np.asarray(assignment, dtype=np.int64)
    ids = np.flatnonzero(a == side).astype(np.int64)
    remap = np.full(H.num_vertices, -1, dtype=np.int64)
    remap[ids] = np.arange(len(ids), dtype=np.int64)
    if H.num_pins:
        eids = np.repeat(np.arange(H.num_hyperedges, dtype=np.int64),
                         H.hyperedge_sizes())
        inside = remap[H.pins] >= 0
        cnt = np.bincount(eids[inside], minlength=H.num_hyperedges)
    else:
        eids = np.zeros(0, dtype=np.int64)
        inside = np.zeros(0, dtype=np.bool_)
        cnt = np.zeros(H.num_hyperedges, dtype=np.int64)
    keep = cnt >= 2
    sel = inside & keep[eids] if H.num_pins else inside
    new_pins = remap[H.pins[sel]]
    new_sizes = cnt[keep]
    offsets = np.zeros(int(keep.sum()) + 1, dtype=np.int64)
    np.cumsum(new_sizes, out=offsets[1:])
    sub = Hypergraph.from_csr(len(ids), offsets, new_pins,
                              H.vertex_weight[ids], H.hyperedge_weight[keep])
    return sub, ids


def recursive_bipartition(H: Hypergraph, cfg: PartitionConfig) -> PartitionState:
    """k-way initial partition by recursive 2-way splitting."""
    k = cfg.k
    lmax = max_block_weight(H.total_vertex_weight, k, cfg.epsilon_fraction())
    if H.num_vertices and int(H.vertex_weight.max()) > lmax:
        raise InfeasibleBalanceError(
            f"vertex weight {int(H.vertex_weight.max())} exceeds the block "
            f"capacity {lmax}")
    assignment = np.zeros(H.num_vertices, dtype=np.int64)
    if k > 1:
        depth = math.ceil(math.log2(k))
        eps_prime = (1.0 + float(cfg.epsilon_fraction())) ** (1.0 / depth) - 1.0
        _split(H, np.arange(H.num_vertices, dtype=np.int64), k, 0, 1,
               eps_prime, lmax, cfg, assignment)
    return PartitionState.from_assignment(H, k, assignment, max_weight=lmax)


def _split(sub: Hypergraph, ids: np.ndarray, k_sub: int, block_lo: int,
           path: int, eps_prime: float, lmax: int, cfg: PartitionConfig,
           assignment: np.ndarray) -> None:
    if k_sub == 1:
        assignment[ids] = block_lo
        return
    k0 = (k_sub + 1) // 2
    k1 = k_sub - k0
    c0, c1 = side_caps(sub.total_vertex_weight, (k0, k1), eps_prime)
    # a side that will become k_i final blocks can never exceed k_i * L_max
    caps = (min(c0, k0 * lmax), min(c1, k1 * lmax))
    reps = cfg.initial_repetitions

    def make_task(algo: int, rep: int):
        tag = algo * reps + rep
        seed = seed_combine(cfg.seed, _SEED_DOMAIN, path, algo, rep)

        def run():
            return flat_bipartition(sub, algo, seed, eps_prime,
                                    fractions=(k0, k1), caps=caps, tag=tag)

        return run

    tasks = [make_task(algo, rep)
             for algo in range(ALGORITHM_COUNT) for rep in range(reps)]
    best = select_best(parallel.run_tasks(tasks))
    refined, _, _ = fm2way(sub, best.assignment, caps, cfg.fm_rounds)
    for side, (k_side, lo) in enumerate(((k0, block_lo),
                                         (k1, block_lo + k0))):
        child, child_ids = extract_side(sub, refined, side)
        _split(child, ids[child_ids], k_side, lo, 2 * path + side,
               eps_prime, lmax, cfg, assignment)
