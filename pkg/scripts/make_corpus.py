#!/usr/bin/env python3
"""Regenerate the bundled test corpus under data/corpus/.

Every instance is produced from a fixed seed, so the files are stable; the
suite treats them as checked-in fixtures, not as throwaway artifacts. The
collection deliberately covers: unit and skewed vertex weights, hyperedge
weights, one hyperedge larger than the rating-size cutoff, disconnected
instances, degree-0 vertices, duplicate pins inside a file, and all four
header format variants.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from detpart import Hypergraph, write_hmetis  # noqa: E402

OUT = Path(__file__).resolve().parent.parent / "data" / "corpus"

KMAX = 16  # every instance stays feasible up to this block count


def feasible_weights(w, headroom=1):
    """Clamp vertex weights until none exceeds the k=KMAX block capacity
    divided by `headroom`.

    headroom > 1 keeps the heaviest vertex well under the cap; small
    instances never coarsen, so without that margin a k=16 split turns
    into a tight bin-packing puzzle no partitioner is obliged to solve.
    """
    from detpart import max_block_weight
    w = np.asarray(w, dtype=np.int64)
    while True:
        cap = max_block_weight(int(w.sum()), KMAX, "0.03") // headroom
        if w.max(initial=0) <= cap:
            return w.tolist()
        w = np.minimum(w, max(1, int(cap)))


def random_instance(rng, nv, ne, size_lo, size_hi, vw=None, ew=None):
    pls = []
    for _ in range(ne):
        sz = int(rng.integers(size_lo, size_hi + 1))
        sz = min(sz, nv)
        pls.append(rng.choice(nv, size=sz, replace=False).tolist())
    return Hypergraph.from_pin_lists(pls, nv, vertex_weights=vw,
                                     hyperedge_weights=ew)


def planted_communities(rng, nv, ne, groups, p_in, size_lo, size_hi):
    comm = rng.integers(0, groups, size=nv)
    pls = []
    for _ in range(ne):
        sz = int(rng.integers(size_lo, size_hi + 1))
        if rng.random() < p_in:
            g = int(rng.integers(0, groups))
            pool = np.flatnonzero(comm == g)
            if len(pool) < sz:
                pool = np.arange(nv)
        else:
            pool = np.arange(nv)
        pls.append(rng.choice(pool, size=min(sz, len(pool)),
                              replace=False).tolist())
    return Hypergraph.from_pin_lists(pls, nv)


def path_of_cliques(blocks, block_size):
    # consecutive cliques overlap in one vertex; good for cut structure
    nv = blocks * (block_size - 1) + 1
    pls = []
    for b in range(blocks):
        start = b * (block_size - 1)
        verts = list(range(start, start + block_size))
        pls.append(verts)
        for i in range(block_size - 1):
            pls.append([verts[i], verts[i + 1]])
    return Hypergraph.from_pin_lists(pls, nv)


def grid2d(rows, cols, seg):
    pls = []
    for r in range(rows):
        for c0 in range(0, cols - 1, seg - 1):
            pls.append([r * cols + c for c in range(c0, min(c0 + seg, cols))])
    for c in range(cols):
        for r0 in range(0, rows - 1, seg - 1):
            pls.append([r * cols + c for r in range(r0, min(r0 + seg, rows))])
    pls = [p for p in pls if len(p) >= 2]
    return Hypergraph.from_pin_lists(pls, rows * cols)


def ring_of_cliques(n_cliques, size):
    nv = n_cliques * (size - 1)
    pls = []
    for b in range(n_cliques):
        start = b * (size - 1)
        verts = [(start + i) % nv for i in range(size)]
        pls.append(verts)
    return Hypergraph.from_pin_lists(pls, nv)


def disconnected(rng, comp_sizes, ne_per, extra_isolated):
    pls = []
    base = 0
    for cs, ne in zip(comp_sizes, ne_per):
        for _ in range(ne):
            sz = int(rng.integers(2, 6))
            pls.append((base + rng.choice(cs, size=min(sz, cs),
                                          replace=False)).tolist())
        base += cs
    nv = base + extra_isolated  # the trailing vertices touch no hyperedge
    return Hypergraph.from_pin_lists(pls, nv)


def with_giant_edge(rng, nv, giant_size, ne_small):
    pls = [rng.choice(nv, size=giant_size, replace=False).tolist()]
    for _ in range(ne_small):
        sz = int(rng.integers(2, 6))
        pls.append(rng.choice(nv, size=sz, replace=False).tolist())
    return Hypergraph.from_pin_lists(pls, nv)


def write(name, H, fmt=None):
    data = write_hmetis(H, fmt=fmt)
    (OUT / f"{name}.hgr").write_bytes(data)
    pins = int(H.num_pins)
    print(f"{name:<22s} |V|={H.num_vertices:>6d} |E|={H.num_hyperedges:>6d} "
          f"pins={pins:>7d} fmt={fmt if fmt is not None else 'auto'}")


def write_raw(name, text):
    (OUT / f"{name}.hgr").write_text(text)
    print(f"{name:<22s} (hand-written file)")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20260819)

    write("small_unit_a", random_instance(rng, 60, 90, 2, 5))
    write("small_unit_b", planted_communities(rng, 80, 120, 4, 0.85, 2, 5))
    zipf_vw = feasible_weights(np.minimum(rng.zipf(1.6, size=160), 50),
                               headroom=5)
    write("small_vw", random_instance(rng, 160, 230, 2, 5, vw=zipf_vw),
          fmt=10)
    write("small_ew", random_instance(
        rng, 64, 100, 2, 5, ew=rng.integers(1, 10, size=100).tolist()), fmt=1)
    write("small_both", random_instance(
        rng, 90, 130, 2, 6,
        vw=feasible_weights(rng.integers(1, 8, size=90), headroom=3),
        ew=rng.integers(1, 6, size=130).tolist()), fmt=11)
    write("path_cliques", path_of_cliques(12, 5))
    write("grid_12x12", grid2d(12, 12, 4))
    write("ring_cliques", ring_of_cliques(64, 5))
    write("disconnected", disconnected(rng, [60, 60, 40], [80, 80, 50], 5))
    write("giant_edge", with_giant_edge(rng, 1500, 1200, 400))

    # a file containing duplicate pins; the loader keeps the first of each
    nv_dup = 48
    lines = ["% duplicate pins on purpose"]
    body = []
    for i in range(60):
        sz = int(rng.integers(2, 5))
        pins = (rng.choice(nv_dup, size=sz, replace=False) + 1).tolist()
        if i % 3 == 0:  # repeat one pin so the loader has work to do
            pins.append(pins[int(rng.integers(0, len(pins)))])
        body.append(" ".join(map(str, pins)))
    lines.append(f"{len(body)} {nv_dup}")
    lines.extend(body)
    write_raw("dup_pins", "\n".join(lines) + "\n")

    write("mid_zipf", random_instance(
        rng, 800, 1800, 2, 12,
        vw=feasible_weights(np.minimum(rng.zipf(1.7, size=800), 80))), fmt=11)
    write("mid_comm", planted_communities(rng, 1000, 2000, 8, 0.9, 2, 6))
    write("mid_ew", random_instance(
        rng, 900, 2200, 2, 8,
        ew=np.minimum(rng.zipf(1.8, size=2200), 40).tolist()), fmt=1)
    write("big_mid", random_instance(rng, 4000, 9000, 3, 8))
    write("big", random_instance(
        rng, 10000, 18500, 3, 8,
        vw=feasible_weights(np.minimum(rng.zipf(1.9, size=10000), 30))), fmt=11)


if __name__ == "__main__":
    main()
