"""Run configuration."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from fractions import Fraction


@dataclass
class PartitionConfig:
    """All knobs of a partitioning run.

    The first block mirrors the command line; the second block holds
    constants that have no canonical value anywhere else and are pinned
    here so runs stay reproducible.
    """

    k: int = 2
    epsilon: float = 0.03
    seed: int = 1
    thread_count: int = 1
    preprocessing_rounds: int = 5
    preprocessing_sub_rounds: int = 16
    coarsening_sub_rounds: int = 3
    refinement_sub_rounds: int = 1
    refinement_rounds_per_level: int = 5
    contraction_limit_factor: int = 160
    max_rated_hyperedge_size: int = 1000
    swap_sequential_threshold: int = 2000
    shuffle_chunk_count: int = 256

    # threshold on the median hyperedge size above which the star expansion
    # uses weight(e) * degree(v) / size(e) instead of weight(e) per pin
    nonuniform_edge_weight_median_size: int = 28
    # stop coarsening when a pass shrinks the vertex count by less than this
    coarsening_min_reduction: float = 0.01
    louvain_max_levels: int = 32
    initial_repetitions: int = 20
    fm_rounds: int = 3

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must be in (0, 1)")
        if self.thread_count < 1:
            raise ValueError("thread_count must be >= 1")
        for name in (
            "preprocessing_rounds",
            "refinement_rounds_per_level",
            "contraction_limit_factor",
            "max_rated_hyperedge_size",
            "swap_sequential_threshold",
            "shuffle_chunk_count",
            "initial_repetitions",
            "fm_rounds",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in (
            "preprocessing_sub_rounds",
            "coarsening_sub_rounds",
            "refinement_sub_rounds",
        ):
            v = getattr(self, name)
            if not 1 <= v <= 256:
                raise ValueError(f"{name} must be in [1, 256]")

    def epsilon_fraction(self) -> Fraction:
        """epsilon as the exact decimal the user wrote (0.03 -> 3/100)."""
        return Fraction(str(self.epsilon))

    def contraction_limit(self) -> int:
        return self.contraction_limit_factor * self.k

    def as_dict(self) -> dict:
        return asdict(self)
