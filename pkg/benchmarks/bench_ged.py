"""Time the compiled and pure-Python GED kernels on generated flows.

    python benchmarks/bench_ged.py [--flows 30] [--depth 4] [--repeat 1]

Each kernel computes every pairwise distance in the same pool of flows.
The script checks that both kernels agree, then prints the wall time of
each and the speedup.
"""

from __future__ import annotations

import argparse
import random
import sys
import time
from itertools import combinations

from ata import ged
from ata.tracegen.generator import CaseSpec, generate_case
from ata.tracegen.suite import random_expression


def flow_pool(n: int, depth: int, seed: int) -> list:
    rng = random.Random(seed)
    pool = []
    for i in range(n):
        spec = CaseSpec(
            random_expression(rng, rng.randint(1, 2)),
            parallel=rng.random() < 0.5,
            decomposition_depth=rng.randint(1, depth),
            seed=rng.getrandbits(64),
            case_id=f"b{i:03d}",
        )
        pool.append(generate_case(spec).gt_flow)
    return pool


def run(kernel: str, pairs, budget: int) -> tuple[float, list[float]]:
    start = time.perf_counter()
    distances = [ged.graph_edit_distance(a, b, budget=budget, kernel=kernel).distance for a, b in pairs]
    return time.perf_counter() - start, distances


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--flows", type=int, default=30)
    parser.add_argument("--depth", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=1)
    parser.add_argument("--budget", type=int, default=ged.DEFAULT_BUDGET)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)

    if "cython" not in ged.KERNELS:
        print("compiled kernel not built; run `pip install -e .` with Cython available", file=sys.stderr)
        return 1

    pool = flow_pool(args.flows, args.depth, args.seed)
    pairs = list(combinations(pool, 2))
    sizes = [len(f.nodes) for f in pool]
    print(f"{len(pairs)} pairs, flow sizes {min(sizes)}..{max(sizes)}, budget {args.budget}")

    best: dict[str, float] = {}
    results: dict[str, list[float]] = {}
    for kernel in ("python", "cython"):
        times = []
        for _ in range(args.repeat):
            elapsed, results[kernel] = run(kernel, pairs, args.budget)
            times.append(elapsed)
        best[kernel] = min(times)
        print(f"{kernel:>7}: {best[kernel]:.3f} s (best of {args.repeat})")

    if results["python"] != results["cython"]:
        print("kernels disagree", file=sys.stderr)
        return 1
    print(f"speedup: {best['python'] / best['cython']:.1f}x, distances identical")
    return 0


if __name__ == "__main__":
    sys.exit(main())
