"""Command-line front end.

Exit codes: 0 success (including a failed determinism check, which is a
report outcome, not an error), 2 infeasible instance, 1 I/O or parse
problems.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import PartitionConfig
from .driver import partition, verify_determinism
from .hypergraph import (HypergraphFormatError, InfeasibleBalanceError,
                         load_hmetis, write_partition)


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; this tool reserves 2 for
    # infeasible instances, so remap usage errors to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="detpart",
                description="Deterministic multilevel hypergraph partitioner")
    p.add_argument("--hypergraph", required=True,
                   help="input file in hMetis format")
    p.add_argument("--k", type=int, required=True, help="number of blocks")
    p.add_argument("--epsilon", type=float, default=0.03,
                   help="allowed imbalance (default 0.03)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", help="write the partition (one block id per line)")
    p.add_argument("--sub-rounds-preprocessing", type=int, default=16)
    p.add_argument("--sub-rounds-coarsening", type=int, default=3)
    p.add_argument("--sub-rounds-refinement", type=int, default=1)
    p.add_argument("--rounds-refinement", type=int, default=5)
    p.add_argument("--verify-determinism", metavar="T1,T2,...",
                   help="run once per thread count and compare partitions")
    p.add_argument("--report", choices=("json", "text"), default="text")
    return p


def _print_text_report(rep) -> None:
    print(f"connectivity      {rep.connectivity}")
    print(f"imbalance         {rep.imbalance:.6f}")
    print(f"levels            {rep.num_levels}")
    print(f"partition checksum  {rep.partition_checksum:#018x}")
    for name, secs in rep.phase_seconds.items():
        print(f"  {name:<22s} {secs:8.3f} s")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = PartitionConfig(
            k=args.k, epsilon=args.epsilon, seed=args.seed,
            thread_count=args.threads,
            preprocessing_sub_rounds=args.sub_rounds_preprocessing,
            coarsening_sub_rounds=args.sub_rounds_coarsening,
            refinement_sub_rounds=args.sub_rounds_refinement,
            refinement_rounds_per_level=args.rounds_refinement)
    except ValueError as exc:
        print(f"detpart: bad configuration: {exc}", file=sys.stderr)
        return 1
    try:
        H = load_hmetis(args.hypergraph)
    except (OSError, HypergraphFormatError, ValueError) as exc:
        print(f"detpart: cannot load hypergraph: {exc}", file=sys.stderr)
        return 1

    if args.verify_determinism:
        try:
            counts = [int(t) for t in args.verify_determinism.split(",") if t]
        except ValueError:
            print("detpart: --verify-determinism expects a comma-separated "
                  "list of integers", file=sys.stderr)
            return 1
        try:
            drep = verify_determinism(H, cfg, counts)
        except InfeasibleBalanceError as exc:
            print(f"detpart: infeasible: {exc}", file=sys.stderr)
            return 2
        except ValueError as exc:
            print(f"detpart: {exc}", file=sys.stderr)
            return 1
        if args.report == "json":
            print(json.dumps(drep.as_dict(), indent=2))
        else:
            verdict = "PASS" if drep.passed else "FAIL"
            print(f"determinism {verdict} across threads "
                  f"{','.join(map(str, drep.thread_counts))}")
            if not drep.passed:
                print(f"first divergent phase: {drep.first_divergent_phase}")
            print(f"connectivity {drep.connectivity}")
        return 0

    try:
        P, rep = partition(H, cfg)
    except InfeasibleBalanceError as exc:
        print(f"detpart: infeasible: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"detpart: {exc}", file=sys.stderr)
        return 1

    if args.output:
        try:
            with open(args.output, "wb") as fh:
                fh.write(write_partition(P))
        except OSError as exc:
            print(f"detpart: cannot write output: {exc}", file=sys.stderr)
            return 1

    if args.report == "json":
        print(json.dumps(rep.as_dict(), indent=2))
    else:
        _print_text_report(rep)
    return 0


if __name__ == "__main__":
    sys.exit(main())
