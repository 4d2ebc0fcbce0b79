"""Deterministic shared-memory parallel multilevel hypergraph partitioner."""

from .config import PartitionConfig
from .driver import (
    DeterminismReport,
    MultilevelHierarchy,
    RunReport,
    assignment_checksum,
    partition,
    project_partition,
    verify_determinism,
)
from .hypergraph import (
    Hypergraph,
    PartitionState,
    Clustering,
    HypergraphFormatError,
    InfeasibleBalanceError,
    load_hmetis,
    write_hmetis,
    write_partition,
    read_partition,
    connectivity_metric,
    max_block_weight,
    imbalance,
    check_balance,
)

__all__ = [
    "PartitionConfig",
    "Hypergraph",
    "PartitionState",
    "Clustering",
    "HypergraphFormatError",
    "InfeasibleBalanceError",
    "load_hmetis",
    "write_hmetis",
    "write_partition",
    "read_partition",
    "connectivity_metric",
    "max_block_weight",
    "imbalance",
    "check_balance",
    "partition",
    "project_partition",
    "verify_determinism",
    "assignment_checksum",
    "RunReport",
    "DeterminismReport",
    "MultilevelHierarchy",
    "__version__",
]

__version__ = "0.1.0"
