"""Multilevel pipeline orchestration and run reporting.

partition() wires the phases together: community detection, coarsening to
the contraction limit, recursive bipartitioning of the coarsest hypergraph,
then uncoarsening with label propagation refinement at every level. Phases
are barriers, so the driver introduces no races of its own; determinism
with respect to the thread count is inherited from the phase contracts.

Partition checksum, pinned: for assignment array a, the checksum is
  sum over i of mix64(mix64(i + 1) xor (a[i] + 1))   (mod 2^64),
a commutative fold, so it is independent of traversal order and usable to
compare runs cheaply without shipping whole assignments.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import parallel
from .coarsening import ContractionResult, coarsen_to_limit
from .config import PartitionConfig
from .hypergraph import (Hypergraph, InfeasibleBalanceError, PartitionState,
                         connectivity_metric, imbalance, max_block_weight)
from .initial import recursive_bipartition
from .preprocessing import detect_communities
from .refinement import level_seed, lp_refine

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64_vec(x: np.ndarray) -> np.ndarray:
    z = (x + _GOLDEN).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def assignment_checksum(values) -> int:
    """Order-independent 64-bit digest of an integer array (see module doc)."""
    a = np.ascontiguousarray(values, dtype=np.int64).astype(np.uint64)
    if a.size == 0:
        return 0
    idx = np.arange(1, a.size + 1, dtype=np.uint64)
    mixed = _mix64_vec(_mix64_vec(idx) ^ (a + np.uint64(1)))
    # uint64 addition wraps, which is exactly the mod-2^64 fold we want
    return int(np.bitwise_and(np.add.reduce(mixed), np.uint64(0xFFFFFFFFFFFFFFFF)))


@dataclass
class MultilevelHierarchy:
    """Contraction levels from finest to coarsest plus the finest-level
    community assignment that guided them."""

    finest: Hypergraph
    levels: list[ContractionResult]
    communities: np.ndarray

    def coarsest(self) -> Hypergraph:
        return self.levels[-1].coarse if self.levels else self.finest

    def hypergraph_at(self, level: int) -> Hypergraph:
        """Hypergraph whose vertices the level-th vertex_map maps FROM."""
        return self.finest if level == 0 else self.levels[level - 1].coarse

    def compose_map(self) -> np.ndarray:
        """Map from finest vertices to coarsest vertices."""
        m = np.arange(self.finest.num_vertices, dtype=np.int64)
        for res in self.levels:
            m = res.vertex_map[m]
        return m


@dataclass
class RunReport:
    connectivity: int
    imbalance: float
    phase_seconds: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    partition_checksum: int = 0
    phase_checksums: list = field(default_factory=list)
    num_levels: int = 0

    def as_dict(self) -> dict:
        return {
            "connectivity": self.connectivity,
            "imbalance": self.imbalance,
            "phase_seconds": dict(self.phase_seconds),
            "config": dict(self.config),
            "partition_checksum": self.partition_checksum,
            "phase_checksums": [list(pc) for pc in self.phase_checksums],
            "num_levels": self.num_levels,
        }


def project_partition(H_fine: Hypergraph, P_coarse: PartitionState,
                      vertex_map: np.ndarray) -> PartitionState:
    """Pull a coarse partition down one level: every fine vertex takes its
    cluster's block. Connectivity, imbalance and block weights are
    unchanged by construction (contraction preserves pin-block counts)."""
    fine_assignment = P_coarse.assignment[vertex_map]
    return PartitionState.from_assignment(H_fine, P_coarse.k, fine_assignment,
                                          max_weight=P_coarse.max_block_weight)


def partition(H: Hypergraph, cfg: PartitionConfig):
    """Run the full pipeline; returns (PartitionState, RunReport).

    Deterministic in (H, cfg.seed, cfg parameters); cfg.thread_count only
    changes wall time. Raises InfeasibleBalanceError when some vertex is
    heavier than the block capacity, ValueError when k exceeds |V|.
    """
    if cfg.k > H.num_vertices:
        raise ValueError(
            f"cannot split {H.num_vertices} vertices into {cfg.k} blocks")
    lmax = max_block_weight(H.total_vertex_weight, cfg.k,
                            cfg.epsilon_fraction())
    if H.num_vertices and int(H.vertex_weight.max()) > lmax:
        raise InfeasibleBalanceError(
            f"vertex weight {int(H.vertex_weight.max())} exceeds the block "
            f"capacity {lmax}")
    parallel.set_num_threads(cfg.thread_count)

    phase_seconds: dict[str, float] = {}
    phase_checksums: list[tuple[str, int]] = []

    t0 = time.perf_counter()
    communities = detect_communities(H, cfg)
    phase_seconds["preprocessing"] = time.perf_counter() - t0
    phase_checksums.append(("preprocessing", assignment_checksum(communities)))

    t0 = time.perf_counter()
    levels = coarsen_to_limit(H, communities, cfg)
    phase_seconds["coarsening"] = time.perf_counter() - t0
    for i, res in enumerate(levels):
        phase_checksums.append((f"coarsening/level {i + 1}",
                                assignment_checksum(res.vertex_map)))
    hier = MultilevelHierarchy(H, levels, communities)
    coarsest = hier.coarsest()

    t0 = time.perf_counter()
    P = recursive_bipartition(coarsest, cfg)
    phase_seconds["initial partitioning"] = time.perf_counter() - t0
    phase_checksums.append(("initial partitioning",
                            assignment_checksum(P.assignment)))

    t0 = time.perf_counter()
    lp_refine(coarsest, P, cfg, seed=level_seed(cfg.seed, len(levels)))
    phase_checksums.append((f"refinement/level {len(levels)}",
                            assignment_checksum(P.assignment)))
    for i in range(len(levels) - 1, -1, -1):
        fine = hier.hypergraph_at(i)
        P = project_partition(fine, P, levels[i].vertex_map)
        lp_refine(fine, P, cfg, seed=level_seed(cfg.seed, i))
        phase_checksums.append((f"refinement/level {i}",
                                assignment_checksum(P.assignment)))
    phase_seconds["refinement"] = time.perf_counter() - t0

    report = RunReport(
        connectivity=connectivity_metric(H, P.assignment),
        imbalance=imbalance(H, P),
        phase_seconds=phase_seconds,
        config=cfg.as_dict(),
        partition_checksum=assignment_checksum(P.assignment),
        phase_checksums=phase_checksums,
        num_levels=len(levels),
    )
    return P, report


@dataclass
class DeterminismReport:
    passed: bool
    thread_counts: list
    connectivity: int
    first_divergent_phase: str | None = None
    partition_checksums: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "thread_counts": list(self.thread_counts),
            "connectivity": self.connectivity,
            "first_divergent_phase": self.first_divergent_phase,
            "partition_checksums": list(self.partition_checksums),
        }


def verify_determinism(H: Hypergraph, cfg: PartitionConfig,
                       thread_counts) -> DeterminismReport:
    """Partition once per thread count and compare results bit for bit.

    Needs at least two thread counts. On divergence the report names the
    first pipeline phase whose checksum differs between runs, which is
    where a nondeterminism bug entered.
    """
    counts = [int(t) for t in thread_counts]
    if len(counts) < 2:
        raise ValueError("need at least two thread counts to compare")
    runs = []
    for t in counts:
        P, rep = partition(H, replace(cfg, thread_count=t))
        runs.append((t, P.assignment.copy(), rep))
    base = runs[0][1]
    passed = all(np.array_equal(base, a) for _, a, _ in runs[1:])
    divergent = None
    if not passed:
        base_phases = runs[0][2].phase_checksums
        for pi in range(max(len(r[2].phase_checksums) for r in runs)):
            vals = set()
            for _, _, rep in runs:
                if pi < len(rep.phase_checksums):
                    vals.add(rep.phase_checksums[pi])
                else:
                    vals.add(("missing", -1))
            if len(vals) > 1:
                divergent = (base_phases[pi][0] if pi < len(base_phases)
                             else f"phase index {pi}")
                break
    return DeterminismReport(
        passed=passed,
        thread_counts=counts,
        connectivity=runs[0][2].connectivity,
        first_divergent_phase=divergent,
        partition_checksums=[r[2].partition_checksum for r in runs],
    )
