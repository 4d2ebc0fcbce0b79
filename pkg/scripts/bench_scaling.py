#!/usr/bin/env python3
"""Thread-scaling sweep: partition each instance at several thread counts
and report wall time per phase plus speedup over the single-threaded run.

Since every run is bit-deterministic, the partition checksum must agree
across thread counts; the script asserts that as a side effect.
"""

import argparse
import os
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from detpart import PartitionConfig, load_hmetis, partition

PHASES = ("preprocessing", "coarsening", "initial partitioning", "refinement")


def time_once(H, k, seed, threads):
    cfg = PartitionConfig(k=k, seed=seed, thread_count=threads)
    t0 = time.perf_counter()
    P, rep = partition(H, cfg)
    return time.perf_counter() - t0, rep


def bench_instance(path, k, seed, thread_counts, repeats):
    H = load_hmetis(path)
    print(f"\n{path.name}: {H.num_vertices} vertices, {H.num_hyperedges} "
          f"hyperedges, {H.num_pins} pins, k={k}")
    header = f"{'threads':>8} {'total':>9} " + " ".join(
        f"{p[:7]:>9}" for p in PHASES) + f" {'speedup':>8}  checksum"
    print(header)

    base = None
    checksums = set()
    for tc in thread_counts:
        best_total, best_rep = min(
            (time_once(H, k, seed, tc) for _ in range(repeats)),
            key=lambda tr: tr[0])
        if base is None:
            base = best_total
        checksums.add(best_rep.partition_checksum)
        phases = " ".join(
            f"{best_rep.phase_seconds.get(p, 0.0):>9.3f}" for p in PHASES)
        print(f"{tc:>8} {best_total:>9.3f} {phases} {base / best_total:>8.2f}"
              f"  {best_rep.partition_checksum:016x}")

    if len(checksums) != 1:
        print(f"ERROR: checksum diverged across thread counts: {checksums}")
        return False
    return True


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("instances", nargs="*", type=Path,
                    help="hMETIS files (default: the bundled big instances)")
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--threads", type=int, nargs="+", default=[1, 2, 4, 8])
    ap.add_argument("--repeats", type=int, default=3,
                    help="runs per cell, report the minimum")
    args = ap.parse_args(argv)

    paths = args.instances
    if not paths:
        corpus = Path(__file__).resolve().parent.parent / "data" / "corpus"
        paths = [corpus / "big_mid.hgr", corpus / "big.hgr"]

    print(f"host reports {os.cpu_count()} cpu core(s)")
    # warm the jit cache outside the timed region
    warm = load_hmetis(paths[0])
    partition(warm, PartitionConfig(k=args.k, seed=args.seed, thread_count=1))

    ok = all(
        bench_instance(p, args.k, args.seed, args.threads, args.repeats)
        for p in paths)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
