"""Hypergraph structure, file I/O, and partition bookkeeping.

A hypergraph is stored twice in CSR form: pin lists (hyperedge -> vertices)
and incident nets (vertex -> hyperedges). Vertices and hyperedges are dense
0-based ids; weights are positive int64.

The file format is the plain-text hypergraph exchange format: a header line
``num_hyperedges num_vertices [fmt]`` with fmt absent, 1, 10, or 11; one
line per hyperedge listing 1-indexed pins (preceded by the hyperedge weight
when fmt is 1 or 11); then one vertex weight per line when fmt is 10 or 11.
Lines starting with '%' are comments.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


class HypergraphFormatError(ValueError):
    """Malformed hypergraph file; message carries the 1-based line number."""


class InfeasibleBalanceError(ValueError):
    """No balanced partition can exist (a vertex outweighs the block cap)."""


def max_block_weight(total_weight: int, k: int, epsilon) -> int:
    """Largest allowed block weight: floor((1 + eps) * ceil(total/k)).

    Computed in exact rational arithmetic; epsilon given as a float is
    interpreted as the decimal literal it prints as (0.03 -> 3/100).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    eps = epsilon if isinstance(epsilon, Fraction) else Fraction(str(epsilon))
    ceil_avg = -(-int(total_weight) // k)
    return int(math.floor((1 + eps) * ceil_avg))


@dataclass
class Hypergraph:
    num_vertices: int
    num_hyperedges: int
    pin_list_offsets: np.ndarray   # int64, len num_hyperedges + 1
    pins: np.ndarray               # int64, len total pins
    incidence_offsets: np.ndarray  # int64, len num_vertices + 1
    incident_nets: np.ndarray      # int64, sorted ascending per vertex
    vertex_weight: np.ndarray      # int64, positive
    hyperedge_weight: np.ndarray   # int64, positive
    total_vertex_weight: int = field(default=0)

    @property
    def num_pins(self) -> int:
        return int(self.pins.shape[0])

    @classmethod
    def from_csr(cls, num_vertices: int, pin_list_offsets, pins,
                 vertex_weight=None, hyperedge_weight=None) -> "Hypergraph":
        offsets = np.ascontiguousarray(pin_list_offsets, dtype=np.int64)
        pin_arr = np.ascontiguousarray(pins, dtype=np.int64)
        num_e = len(offsets) - 1
        if vertex_weight is None:
            vw = np.ones(num_vertices, dtype=np.int64)
        else:
            vw = np.ascontiguousarray(vertex_weight, dtype=np.int64)
        if hyperedge_weight is None:
            ew = np.ones(num_e, dtype=np.int64)
        else:
            ew = np.ascontiguousarray(hyperedge_weight, dtype=np.int64)
        inc_off, inc = _build_incidence(num_vertices, num_e, offsets, pin_arr)
        return cls(num_vertices, num_e, offsets, pin_arr, inc_off, inc,
                   vw, ew, int(vw.sum()))

    @classmethod
    def from_pin_lists(cls, pin_lists: Sequence[Iterable[int]],
                       num_vertices: int | None = None,
                       vertex_weights=None, hyperedge_weights=None) -> "Hypergraph":
        """Build from Python pin lists; duplicate pins are dropped (first kept)."""
        cleaned = []
        for line in pin_lists:
            seen = set()
            out = []
            for p in line:
                if p not in seen:
                    seen.add(p)
                    out.append(int(p))
            cleaned.append(out)
        if num_vertices is None:
            num_vertices = 1 + max((max(l) for l in cleaned if l), default=-1)
        offsets = np.zeros(len(cleaned) + 1, dtype=np.int64)
        np.cumsum([len(l) for l in cleaned], out=offsets[1:])
        pins = np.fromiter((p for l in cleaned for p in l),
                           dtype=np.int64, count=int(offsets[-1]))
        return cls.from_csr(num_vertices, offsets, pins,
                            vertex_weights, hyperedge_weights)

    def pins_of(self, e: int) -> np.ndarray:
        return self.pins[self.pin_list_offsets[e]:self.pin_list_offsets[e + 1]]

    def nets_of(self, v: int) -> np.ndarray:
        return self.incident_nets[self.incidence_offsets[v]:self.incidence_offsets[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.incidence_offsets[v + 1] - self.incidence_offsets[v])

    def hyperedge_sizes(self) -> np.ndarray:
        return np.diff(self.pin_list_offsets)

    def validate(self) -> None:
        """Structural invariant check, meant for tests and loaders."""
        assert self.pin_list_offsets[0] == 0
        assert self.pin_list_offsets[-1] == self.num_pins
        assert np.all(np.diff(self.pin_list_offsets) >= 0)
        if self.num_pins:
            assert self.pins.min() >= 0 and self.pins.max() < self.num_vertices
        assert np.all(self.vertex_weight > 0)
        assert np.all(self.hyperedge_weight > 0)
        assert self.total_vertex_weight == int(self.vertex_weight.sum())
        assert self.incidence_offsets[-1] == self.num_pins
        for v in range(self.num_vertices):
            nets = self.nets_of(v)
            assert np.all(np.diff(nets) > 0), "incident nets must be sorted, unique"
        # pins within a hyperedge are unique
        for e in range(self.num_hyperedges):
            ps = self.pins_of(e)
            assert len(np.unique(ps)) == len(ps)


def _build_incidence(num_vertices, num_hyperedges, offsets, pins):
    sizes = np.diff(offsets)
    eids = np.repeat(np.arange(num_hyperedges, dtype=np.int64), sizes)
    order = np.argsort(pins, kind="stable")  # stable keeps eids ascending per vertex
    inc = eids[order]
    counts = np.bincount(pins, minlength=num_vertices) if len(pins) else np.zeros(num_vertices, dtype=np.int64)
    inc_off = np.zeros(num_vertices + 1, dtype=np.int64)
    np.cumsum(counts, out=inc_off[1:])
    return inc_off, np.ascontiguousarray(inc, dtype=np.int64)


def _read_source(source) -> bytes:
    if isinstance(source, bytes):
        return source
    if isinstance(source, str) and "\n" in source:
        return source.encode()
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read()
    data = source.read()
    return data if isinstance(data, bytes) else data.encode()


def load_hmetis(source) -> Hypergraph:
    """Parse a hypergraph file (path, bytes, or open stream).

    Raises HypergraphFormatError with a 1-based line number on any
    structural problem: wrong counts, non-positive weights, out-of-range
    pins, bad fmt, trailing garbage. Duplicate pins within a hyperedge are
    dropped.
    """
    text = _read_source(source).decode("utf-8", errors="strict")
    lines = text.split("\n")

    def err(ln: int, msg: str):
        raise HypergraphFormatError(f"line {ln}: {msg}")

    pos = 0

    def next_tokens():
        nonlocal pos
        while pos < len(lines):
            pos += 1
            raw = lines[pos - 1]
            stripped = raw.strip()
            if not stripped or stripped.startswith("%"):
                continue
            return pos, stripped.split()
        return None, None

    ln, toks = next_tokens()
    if toks is None:
        raise HypergraphFormatError("line 1: empty file")
    if len(toks) not in (2, 3):
        err(ln, "header must be 'num_hyperedges num_vertices [fmt]'")
    try:
        num_e, num_v = int(toks[0]), int(toks[1])
    except ValueError:
        err(ln, "header counts must be integers")
    fmt = 0
    if len(toks) == 3:
        try:
            fmt = int(toks[2])
        except ValueError:
            err(ln, "fmt must be an integer")
        if fmt not in (1, 10, 11):
            err(ln, f"unsupported fmt {fmt}")
    if num_e < 0 or num_v < 0:
        err(ln, "negative counts")
    has_edge_w = fmt in (1, 11)
    has_vertex_w = fmt in (10, 11)

    pin_lists: list[list[int]] = []
    edge_w = np.ones(num_e, dtype=np.int64)
    for e in range(num_e):
        ln, toks = next_tokens()
        if toks is None:
            raise HypergraphFormatError(
                f"line {len(lines)}: expected {num_e} hyperedge lines, found {e}")
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            err(ln, "non-integer token in hyperedge line")
        if has_edge_w:
            if len(vals) < 2:
                err(ln, "hyperedge line needs a weight and at least one pin")
            if vals[0] < 1:
                err(ln, f"hyperedge weight must be positive, got {vals[0]}")
            edge_w[e] = vals[0]
            vals = vals[1:]
        if not vals:
            err(ln, "hyperedge with no pins")
        seen = set()
        pins = []
        for p in vals:
            if not 1 <= p <= num_v:
                err(ln, f"pin {p} out of range [1, {num_v}]")
            if p - 1 not in seen:
                seen.add(p - 1)
                pins.append(p - 1)
        pin_lists.append(pins)

    vertex_w = np.ones(num_v, dtype=np.int64)
    if has_vertex_w:
        for v in range(num_v):
            ln, toks = next_tokens()
            if toks is None:
                raise HypergraphFormatError(
                    f"line {len(lines)}: expected {num_v} vertex weight lines, found {v}")
            if len(toks) != 1:
                err(ln, "vertex weight line must hold one integer")
            try:
                w = int(toks[0])
            except ValueError:
                err(ln, "vertex weight must be an integer")
            if w < 1:
                err(ln, f"vertex weight must be positive, got {w}")
            vertex_w[v] = w

    ln, toks = next_tokens()
    if toks is not None:
        err(ln, "trailing content after the expected line count")

    offsets = np.zeros(num_e + 1, dtype=np.int64)
    np.cumsum([len(l) for l in pin_lists], out=offsets[1:])
    pins_arr = np.fromiter((p for l in pin_lists for p in l),
                           dtype=np.int64, count=int(offsets[-1]))
    return Hypergraph.from_csr(num_v, offsets, pins_arr, vertex_w, edge_w)


def write_hmetis(H: Hypergraph, fmt: int | None = None) -> bytes:
    """Serialize to the exchange format; fmt defaults to the smallest one
    that preserves all weights."""
    if fmt is None:
        nontrivial_e = bool(np.any(H.hyperedge_weight != 1))
        nontrivial_v = bool(np.any(H.vertex_weight != 1))
        fmt = (1 if nontrivial_e else 0) + (10 if nontrivial_v else 0)
    if fmt not in (0, 1, 10, 11):
        raise ValueError("fmt must be 0, 1, 10, or 11")
    out = io.StringIO()
    header = f"{H.num_hyperedges} {H.num_vertices}"
    if fmt:
        header += f" {fmt}"
    out.write(header + "\n")
    for e in range(H.num_hyperedges):
        parts = []
        if fmt in (1, 11):
            parts.append(str(int(H.hyperedge_weight[e])))
        parts.extend(str(int(p) + 1) for p in H.pins_of(e))
        out.write(" ".join(parts) + "\n")
    if fmt in (10, 11):
        for v in range(H.num_vertices):
            out.write(f"{int(H.vertex_weight[v])}\n")
    return out.getvalue().encode()


@dataclass
class Clustering:
    """Vertex -> cluster id (cluster ids are representative vertex ids)."""

    cluster_of: np.ndarray     # int64 per vertex
    cluster_weight: np.ndarray  # int64 per cluster id slot

    @classmethod
    def singletons(cls, H: Hypergraph) -> "Clustering":
        return cls(np.arange(H.num_vertices, dtype=np.int64),
                   H.vertex_weight.copy())

    def num_clusters(self) -> int:
        return len(np.unique(self.cluster_of))


@dataclass
class PartitionState:
    """k-way partition with incrementally maintained pin counts.

    pin_count[e, i] is the number of pins of hyperedge e in block i;
    connectivity[e] is the number of blocks hyperedge e touches.
    """

    k: int
    assignment: np.ndarray      # int64 per vertex
    block_weight: np.ndarray    # int64 per block
    pin_count: np.ndarray       # int64, shape (num_hyperedges, k)
    connectivity: np.ndarray    # int64 per hyperedge
    max_block_weight: int

    @classmethod
    def from_assignment(cls, H: Hypergraph, k: int, assignment,
                        max_weight: int | None = None,
                        epsilon=0.03) -> "PartitionState":
        a = np.ascontiguousarray(assignment, dtype=np.int64)
        if a.shape[0] != H.num_vertices:
            raise ValueError("assignment length must equal num_vertices")
        if a.size and (a.min() < 0 or a.max() >= k):
            raise ValueError("block ids out of range")
        bw = np.zeros(k, dtype=np.int64)
        np.add.at(bw, a, H.vertex_weight)
        pc = np.zeros((H.num_hyperedges, k), dtype=np.int64)
        if H.num_pins:
            eids = np.repeat(np.arange(H.num_hyperedges, dtype=np.int64),
                             H.hyperedge_sizes())
            np.add.at(pc, (eids, a[H.pins]), 1)
        lam = np.count_nonzero(pc, axis=1).astype(np.int64)
        if max_weight is None:
            max_weight = max_block_weight(H.total_vertex_weight, k, epsilon)
        return cls(k, a, bw, pc, lam, int(max_weight))

    def copy(self) -> "PartitionState":
        return PartitionState(self.k, self.assignment.copy(),
                              self.block_weight.copy(), self.pin_count.copy(),
                              self.connectivity.copy(), self.max_block_weight)

    def connectivity_set(self, e: int) -> np.ndarray:
        return np.flatnonzero(self.pin_count[e])


def connectivity_metric(H: Hypergraph, assignment) -> int:
    """Sum over hyperedges of (blocks touched - 1) * weight.

    Recomputed from scratch by sorting pin blocks per hyperedge; shares no
    state with the incremental bookkeeping, so it doubles as its oracle.
    """
    a = np.asarray(assignment, dtype=np.int64)
    if a.ndim != 1:
        a = np.ascontiguousarray(a).ravel()
    if H.num_hyperedges == 0 or H.num_pins == 0:
        return 0
    sizes = H.hyperedge_sizes()
    eids = np.repeat(np.arange(H.num_hyperedges, dtype=np.int64), sizes)
    blocks = a[H.pins]
    order = np.lexsort((blocks, eids))
    b = blocks[order]
    e = eids[order]
    same_edge = e[1:] == e[:-1]
    new_block = same_edge & (b[1:] != b[:-1])
    lam = np.zeros(H.num_hyperedges, dtype=np.int64)
    lam[np.unique(e)] = 1
    np.add.at(lam, e[1:][new_block], 1)
    return int(((lam - np.minimum(lam, 1)) * H.hyperedge_weight).sum())


def imbalance(H: Hypergraph, state: PartitionState) -> float:
    """max_i weight(block i) * k / total - 1; 0 means perfectly even."""
    total = H.total_vertex_weight
    if total == 0:
        return 0.0
    return float(state.block_weight.max()) * state.k / total - 1.0


def check_balance(H: Hypergraph, state: PartitionState, cfg) -> bool:
    """True iff every block weight is within the exact cap for cfg.epsilon."""
    cap = max_block_weight(H.total_vertex_weight, cfg.k, cfg.epsilon_fraction())
    return bool(state.block_weight.max(initial=0) <= cap)


def write_partition(state_or_assignment) -> bytes:
    a = getattr(state_or_assignment, "assignment", state_or_assignment)
    a = np.asarray(a, dtype=np.int64)
    if a.size == 0:
        return b""
    return ("\n".join(str(int(x)) for x in a) + "\n").encode()


def read_partition(source) -> np.ndarray:
    text = _read_source(source).decode()
    vals = [int(t) for t in text.split()]
    return np.array(vals, dtype=np.int64)
