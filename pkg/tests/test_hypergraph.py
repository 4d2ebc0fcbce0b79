"""Hypergraph structure, file format, metrics."""

import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from detpart import (Hypergraph, HypergraphFormatError, PartitionState,
                     connectivity_metric, imbalance, load_hmetis,
                     max_block_weight, read_partition, write_hmetis,
                     write_partition)

from conftest import random_hypergraph


def test_from_pin_lists_basic():
    H = Hypergraph.from_pin_lists([[0, 1, 2], [2, 3]], 4)
    assert H.num_vertices == 4
    assert H.num_hyperedges == 2
    assert H.pins_of(0).tolist() == [0, 1, 2]
    assert H.nets_of(2).tolist() == [0, 1]
    assert H.degree(3) == 1
    assert H.total_vertex_weight == 4
    H.validate()


def test_duplicate_pins_dropped_keep_first():
    H = Hypergraph.from_pin_lists([[3, 1, 3, 1, 2]], 4)
    assert H.pins_of(0).tolist() == [3, 1, 2]


def test_incident_nets_sorted():
    H = Hypergraph.from_pin_lists([[1, 0], [0, 2], [0, 1, 2]], 3)
    for v in range(3):
        nets = H.nets_of(v).tolist()
        assert nets == sorted(nets)


def test_max_block_weight_exact_rational():
    # floor((1 + 0.03) * ceil(4/2)) = floor(2.06) = 2; a binary-float 0.03
    # would give the same here, but 1.03 * 300 = 309 must not round to 308
    assert max_block_weight(4, 2, 0.03) == 2
    assert max_block_weight(600, 2, 0.03) == 309
    assert max_block_weight(0, 3, 0.03) == 0


def test_connectivity_example():
    H = Hypergraph.from_pin_lists([[0, 1, 2], [2, 3]], 4)
    assert connectivity_metric(H, np.array([0, 0, 1, 1])) == 1
    assert connectivity_metric(H, np.array([0, 1, 2, 3])) == 2 + 1
    assert connectivity_metric(H, np.array([0, 0, 0, 0])) == 0


def test_connectivity_respects_weights():
    H = Hypergraph.from_pin_lists([[0, 1], [1, 2]], 3,
                                  hyperedge_weights=[5, 7])
    assert connectivity_metric(H, np.array([0, 1, 1])) == 5


def test_partition_state_consistency():
    rng = np.random.default_rng(0)
    H = random_hypergraph(rng, 30, 40, vw_hi=4, ew_hi=3)
    a = rng.integers(0, 3, size=30)
    P = PartitionState.from_assignment(H, 3, a)
    assert int(P.block_weight.sum()) == H.total_vertex_weight
    lam_w = int(((P.connectivity - 1) * H.hyperedge_weight).sum())
    assert lam_w == connectivity_metric(H, a)
    assert P.pin_count.sum() == H.num_pins


def test_partition_state_rejects_bad_blocks():
    H = Hypergraph.from_pin_lists([[0, 1]], 2)
    with pytest.raises(ValueError):
        PartitionState.from_assignment(H, 2, np.array([0, 5]))


def test_imbalance_zero_when_even():
    H = Hypergraph.from_pin_lists([[0, 1], [2, 3]], 4)
    P = PartitionState.from_assignment(H, 2, np.array([0, 0, 1, 1]))
    assert imbalance(H, P) == 0.0


HDR_CASES = [
    (None, ""),
    (1, " 1"),
    (10, " 10"),
    (11, " 11"),
]


@pytest.mark.parametrize("fmt,suffix", HDR_CASES)
def test_hmetis_roundtrip_formats(fmt, suffix):
    rng = np.random.default_rng(3)
    H = random_hypergraph(rng, 25, 30,
                          vw_hi=5 if fmt in (10, 11) else 1,
                          ew_hi=4 if fmt in (1, 11) else 1)
    data = write_hmetis(H, fmt=fmt)
    first = data.decode().splitlines()[0]
    assert first == f"30 25{suffix}"
    H2 = load_hmetis(data)
    assert H2.num_vertices == H.num_vertices
    assert np.array_equal(H2.pins, H.pins)
    assert np.array_equal(H2.vertex_weight, H.vertex_weight)
    assert np.array_equal(H2.hyperedge_weight, H.hyperedge_weight)


def test_hmetis_auto_format_picks_smallest():
    H = Hypergraph.from_pin_lists([[0, 1]], 2)
    assert write_hmetis(H).decode().splitlines()[0] == "1 2"
    Hw = Hypergraph.from_pin_lists([[0, 1]], 2, vertex_weights=[2, 1])
    assert write_hmetis(Hw).decode().splitlines()[0] == "1 2 10"


def test_load_comments_and_duplicate_pins():
    text = "% a comment\n2 4\n% another\n1 2 2 3\n3 4 4\n"
    H = load_hmetis(text.encode())
    assert H.num_hyperedges == 2
    assert H.pins_of(0).tolist() == [0, 1, 2]
    assert H.pins_of(1).tolist() == [2, 3]


def test_load_reports_line_numbers():
    with pytest.raises(HypergraphFormatError) as exc:
        load_hmetis(b"1 3\n1 9\n")
    assert "line 2" in str(exc.value)
    with pytest.raises(HypergraphFormatError):
        load_hmetis(b"")
    with pytest.raises(HypergraphFormatError):
        load_hmetis(b"1 2 77\n1 2\n")
    with pytest.raises(HypergraphFormatError) as exc:
        load_hmetis(b"1 2\n1 2\ntrailing\n")
    assert "line 3" in str(exc.value)


def test_load_rejects_nonpositive_weights():
    with pytest.raises(HypergraphFormatError):
        load_hmetis(b"1 2 1\n0 1 2\n")
    with pytest.raises(HypergraphFormatError):
        load_hmetis(b"1 2 10\n1 2\n1 0\n")


def test_load_accepts_stream_and_path(tmp_path, corpus):
    p = tmp_path / "x.hgr"
    p.write_bytes(b"1 3\n1 2 3\n")
    H = load_hmetis(p)
    assert H.num_vertices == 3
    with open(p, "rb") as fh:
        H2 = load_hmetis(fh)
    assert np.array_equal(H2.pins, H.pins)


def test_corpus_loads_and_validates(corpus):
    sizes = []
    for path in corpus:
        H = load_hmetis(path)
        H.validate()
        sizes.append(int(H.num_pins))
    assert min(sizes) >= 100
    assert max(sizes) >= 100_000


def test_corpus_has_required_variety(corpus):
    by_name = {p.stem: load_hmetis(p) for p in corpus}
    assert any((H.vertex_weight > 1).any() for H in by_name.values())
    assert any((H.hyperedge_weight > 1).any() for H in by_name.values())
    assert any(H.hyperedge_sizes().max() > 1000 for H in by_name.values())
    assert any((np.diff(H.incidence_offsets) == 0).any()
               for H in by_name.values()), "need a degree-0 vertex"


def test_partition_io_roundtrip():
    a = np.array([0, 2, 1, 1], dtype=np.int64)
    data = write_partition(a)
    assert read_partition(data).tolist() == a.tolist()
    assert write_partition(np.zeros(0, dtype=np.int64)) == b""


@given(st.integers(1, 200), st.integers(1, 16))
def test_max_block_weight_at_least_average(total, k):
    cap = max_block_weight(total, k, 0.03)
    assert cap >= -(-total // k)
