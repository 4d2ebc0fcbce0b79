"""End-to-end pipeline, determinism verification, and the CLI."""

import json
from pathlib import Path

import numpy as np
import pytest

import detpart.driver as driver
from detpart import (Hypergraph, InfeasibleBalanceError, PartitionConfig,
                     PartitionState, assignment_checksum, connectivity_metric,
                     imbalance, load_hmetis, max_block_weight, partition,
                     project_partition, verify_determinism)
from detpart.cli import main as cli_main
from detpart.coarsening import coarsen_to_limit
from detpart.hypergraph import read_partition
from detpart.preprocessing import detect_communities

from conftest import CORPUS, random_hypergraph


# ---------------------------------------------------------------- checksum

def test_checksum_repeatable_and_sensitive():
    a = np.array([0, 1, 2, 1, 0], dtype=np.int64)
    c = assignment_checksum(a)
    assert c == assignment_checksum(a.copy())
    assert 0 <= c < 2 ** 64
    b = a.copy()
    b[3] = 2
    assert assignment_checksum(b) != c
    # position matters: same multiset of labels, different placement
    assert assignment_checksum([0, 1]) != assignment_checksum([1, 0])
    assert assignment_checksum([]) == 0


def test_checksum_independent_of_summation_order():
    rng = np.random.default_rng(20)
    a = rng.integers(0, 16, size=1000).astype(np.int64)
    c = assignment_checksum(a)
    # fold the terms one by one in reverse; the wrap-add must agree
    idx = np.arange(1, 1001, dtype=np.uint64)
    terms = driver._mix64_vec(driver._mix64_vec(idx)
                              ^ (a.astype(np.uint64) + np.uint64(1)))
    acc = 0
    for t in terms[::-1]:
        acc = (acc + int(t)) & 0xFFFFFFFFFFFFFFFF
    assert acc == c


# ---------------------------------------------------------- projection

def test_projection_preserves_metrics_at_every_level():
    rng = np.random.default_rng(21)
    H = random_hypergraph(rng, 400, 600, vw_hi=2, ew_hi=3)
    cfg = PartitionConfig(k=4, seed=7, contraction_limit_factor=20)
    communities = detect_communities(H, cfg)
    levels = coarsen_to_limit(H, communities, cfg)
    if not levels:
        pytest.skip("instance too small to build a hierarchy")
    hier = driver.MultilevelHierarchy(H, levels, communities)
    coarsest = hier.coarsest()
    lmax = max_block_weight(H.total_vertex_weight, 4, cfg.epsilon_fraction())
    rng2 = np.random.default_rng(22)
    a = rng2.integers(0, 4, size=coarsest.num_vertices).astype(np.int64)
    P = PartitionState.from_assignment(coarsest, 4, a, max_weight=lmax)
    for i in range(len(levels) - 1, -1, -1):
        fine = hier.hypergraph_at(i)
        conn = connectivity_metric(hier.hypergraph_at(i + 1), P.assignment) \
            if i + 1 < len(levels) else connectivity_metric(coarsest,
                                                            P.assignment)
        bw = P.block_weight.copy()
        P = project_partition(fine, P, levels[i].vertex_map)
        assert connectivity_metric(fine, P.assignment) == conn, i
        assert np.array_equal(P.block_weight, bw), i
        assert P.max_block_weight == lmax


def test_projection_identity_on_identity_map():
    rng = np.random.default_rng(23)
    H = random_hypergraph(rng, 30, 40)
    a = rng.integers(0, 3, size=30).astype(np.int64)
    P = PartitionState.from_assignment(H, 3, a, max_weight=30)
    Q = project_partition(H, P, np.arange(30, dtype=np.int64))
    assert np.array_equal(Q.assignment, P.assignment)
    assert np.array_equal(Q.pin_count, P.pin_count)


def test_compose_map_matches_chained_maps():
    rng = np.random.default_rng(26)
    H = random_hypergraph(rng, 300, 450)
    cfg = PartitionConfig(k=2, seed=4, contraction_limit_factor=20)
    communities = detect_communities(H, cfg)
    levels = coarsen_to_limit(H, communities, cfg)
    if not levels:
        pytest.skip("no hierarchy built")
    hier = driver.MultilevelHierarchy(H, levels, communities)
    m = np.arange(H.num_vertices, dtype=np.int64)
    for res in levels:
        m = res.vertex_map[m]
    assert np.array_equal(hier.compose_map(), m)
    assert m.max() < hier.coarsest().num_vertices


# ---------------------------------------------------------- partition()

def test_partition_contracts(corpus_hg):
    H = corpus_hg("mid_comm")
    cfg = PartitionConfig(k=8, epsilon=0.03, seed=3)
    P, rep = partition(H, cfg)
    lmax = max_block_weight(H.total_vertex_weight, 8, cfg.epsilon_fraction())
    assert P.block_weight.max() <= lmax
    assert set(np.unique(P.assignment)) <= set(range(8))
    assert rep.connectivity == connectivity_metric(H, P.assignment)
    assert rep.imbalance == imbalance(H, P)
    assert rep.partition_checksum == assignment_checksum(P.assignment)
    assert set(rep.phase_seconds) == {"preprocessing", "coarsening",
                                      "initial partitioning", "refinement"}
    assert all(s >= 0 for s in rep.phase_seconds.values())
    names = [n for n, _ in rep.phase_checksums]
    assert names[0] == "preprocessing"
    assert names.count("initial partitioning") == 1
    assert names[-1] == "refinement/level 0"
    assert rep.num_levels == sum(1 for n in names
                                 if n.startswith("coarsening/"))


def test_partition_small_instance_no_levels():
    # below the contraction limit there is nothing to coarsen
    rng = np.random.default_rng(24)
    H = random_hypergraph(rng, 12, 18)
    P, rep = partition(H, PartitionConfig(k=2, seed=1))
    assert rep.num_levels == 0
    assert rep.connectivity == connectivity_metric(H, P.assignment)


def test_partition_rejects_bad_k():
    H = Hypergraph.from_pin_lists([[0, 1]], 2)
    with pytest.raises(ValueError):
        partition(H, PartitionConfig(k=3))


def test_partition_rejects_infeasible_weight():
    H = Hypergraph.from_pin_lists([[0, 1]], 2, vertex_weights=[100, 1])
    with pytest.raises(InfeasibleBalanceError):
        partition(H, PartitionConfig(k=2, epsilon=0.03))


def test_partition_repeatable():
    rng = np.random.default_rng(25)
    H = random_hypergraph(rng, 200, 300)
    a1, _ = partition(H, PartitionConfig(k=4, seed=1))
    a2, _ = partition(H, PartitionConfig(k=4, seed=1))
    assert np.array_equal(a1.assignment, a2.assignment)


# ------------------------------------------------- determinism harness

def test_verify_determinism_passes(corpus_hg):
    H = corpus_hg("small_both")
    rep = verify_determinism(H, PartitionConfig(k=4, seed=2), [1, 2, 4])
    assert rep.passed
    assert rep.first_divergent_phase is None
    assert len(set(rep.partition_checksums)) == 1
    assert rep.thread_counts == [1, 2, 4]


def test_verify_determinism_needs_two_counts(corpus_hg):
    H = corpus_hg("small_unit_a")
    with pytest.raises(ValueError):
        verify_determinism(H, PartitionConfig(k=2), [4])


def test_verify_determinism_localizes_injected_fault(corpus_hg, monkeypatch):
    """A thread-count-dependent preprocessing phase must be caught and named
    as the first divergent phase."""
    H = corpus_hg("mid_zipf")
    real = detect_communities

    def glitched(h, cfg):
        if cfg.thread_count > 1:
            # as if a race degraded the clustering to all-singletons
            return np.arange(h.num_vertices, dtype=np.int64)
        return real(h, cfg)

    monkeypatch.setattr(driver, "detect_communities", glitched)
    rep = verify_determinism(H, PartitionConfig(k=4, seed=5), [1, 2])
    assert not rep.passed
    assert rep.first_divergent_phase == "preprocessing"


# ------------------------------------------------------------------ CLI

def run_cli(capsys, *argv):
    code = cli_main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_text_report_and_output_file(capsys, tmp_path):
    hg = str(CORPUS / "small_unit_a.hgr")
    out_file = tmp_path / "part.txt"
    code, out, err = run_cli(capsys, "--hypergraph", hg, "--k", "4",
                             "--seed", "3", "--output", str(out_file))
    assert code == 0, err
    assert "connectivity" in out
    assert "partition checksum" in out
    a = read_partition(str(out_file))
    H = load_hmetis(hg)
    assert len(a) == H.num_vertices
    assert set(np.unique(a)) <= set(range(4))


def test_cli_json_report_mirrors_run_report(capsys):
    hg = str(CORPUS / "small_ew.hgr")
    code, out, err = run_cli(capsys, "--hypergraph", hg, "--k", "2",
                             "--seed", "9", "--report", "json")
    assert code == 0, err
    doc = json.loads(out)
    H = load_hmetis(hg)
    _, rep = partition(H, PartitionConfig(k=2, seed=9))
    want = rep.as_dict()
    assert doc["connectivity"] == want["connectivity"]
    assert doc["partition_checksum"] == want["partition_checksum"]
    assert doc["num_levels"] == want["num_levels"]
    assert [tuple(x) for x in doc["phase_checksums"]] \
        == [tuple(x) for x in want["phase_checksums"]]
    assert set(doc["phase_seconds"]) == set(want["phase_seconds"])
    assert doc["config"] == want["config"]


def test_cli_verify_determinism(capsys):
    hg = str(CORPUS / "path_cliques.hgr")
    code, out, err = run_cli(capsys, "--hypergraph", hg, "--k", "2",
                             "--verify-determinism", "1,2",
                             "--report", "json")
    assert code == 0, err
    doc = json.loads(out)
    assert doc["passed"] is True
    assert doc["thread_counts"] == [1, 2]


def test_cli_exit_1_on_missing_file(capsys):
    code, out, err = run_cli(capsys, "--hypergraph", "/no/such/file.hgr",
                             "--k", "2")
    assert code == 1
    assert "cannot load" in err


def test_cli_exit_1_on_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.hgr"
    bad.write_text("3 2\n1 2\n")  # promises 3 hyperedges, provides 1
    code, out, err = run_cli(capsys, "--hypergraph", str(bad), "--k", "2")
    assert code == 1
    assert "cannot load" in err


def test_cli_exit_1_on_bad_usage(capsys):
    with pytest.raises(SystemExit) as si:
        cli_main(["--k", "2"])  # --hypergraph is required
    assert si.value.code == 1


def test_cli_exit_2_on_infeasible(tmp_path, capsys):
    hg = tmp_path / "heavy.hgr"
    # fmt 10 carries vertex weights; a 90-weight vertex cannot fit a block
    hg.write_text("1 4 10\n1 2\n90\n1\n1\n1\n")
    code, out, err = run_cli(capsys, "--hypergraph", str(hg), "--k", "2")
    assert code == 2
    assert "infeasible" in err


def test_cli_exit_2_on_infeasible_during_verify(tmp_path, capsys):
    hg = tmp_path / "heavy.hgr"
    hg.write_text("1 4 10\n1 2\n90\n1\n1\n1\n")
    code, out, err = run_cli(capsys, "--hypergraph", str(hg), "--k", "2",
                             "--verify-determinism", "1,2")
    assert code == 2


def test_cli_exit_1_on_bad_thread_list(capsys):
    hg = str(CORPUS / "small_unit_a.hgr")
    code, out, err = run_cli(capsys, "--hypergraph", hg, "--k", "2",
                             "--verify-determinism", "1,x")
    assert code == 1
