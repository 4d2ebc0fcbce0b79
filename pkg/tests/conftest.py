import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

CORPUS = Path(__file__).resolve().parent.parent / "data" / "corpus"

settings.register_profile("suite", max_examples=40, deadline=None,
                          derandomize=True)
settings.load_profile("suite")


def corpus_paths():
    return sorted(CORPUS.glob("*.hgr"))


@pytest.fixture(scope="session")
def corpus():
    paths = corpus_paths()
    assert len(paths) >= 15, "bundled corpus went missing"
    return paths


@pytest.fixture(scope="session")
def corpus_hg():
    """Load a bundled instance by stem name, cached for the session."""
    from detpart import load_hmetis
    cache = {}

    def load(stem):
        if stem not in cache:
            cache[stem] = load_hmetis(CORPUS / f"{stem}.hgr")
        return cache[stem]

    return load


def random_hypergraph(rng, nv, ne, size_lo=2, size_hi=6, vw_hi=1, ew_hi=1):
    """Small random instance helper shared by several test modules."""
    from detpart import Hypergraph
    pls = []
    for _ in range(ne):
        sz = int(rng.integers(size_lo, min(size_hi, nv) + 1))
        pls.append(rng.choice(nv, size=sz, replace=False).tolist())
    vw = rng.integers(1, vw_hi + 1, size=nv).tolist() if vw_hi > 1 else None
    ew = rng.integers(1, ew_hi + 1, size=ne).tolist() if ew_hi > 1 else None
    return Hypergraph.from_pin_lists(pls, nv, vertex_weights=vw,
                                     hyperedge_weights=ew)


def balanced_random_assignment(rng, H, k, lmax):
    """Round-robin heaviest-first start that respects the cap."""
    order = np.argsort(-H.vertex_weight, kind="stable")
    a = np.zeros(H.num_vertices, dtype=np.int64)
    bw = np.zeros(k, dtype=np.int64)
    for v in order:
        b = int(np.argmin(bw))
        a[v] = b
        bw[b] += H.vertex_weight[v]
    assert bw.max() <= lmax
    return a
