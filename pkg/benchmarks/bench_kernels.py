"""Compiled scatter/gather kernels vs the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--reps N] [--json out.json]
"""

import argparse
import json
from collections import defaultdict

from sketchtensor import kernels
from sketchtensor.bench import kernel_benchmark


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--json", help="write raw rows here")
    args = parser.parse_args()

    rows = kernel_benchmark(reps=args.reps)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)

    table = defaultdict(dict)
    for r in rows:
        table[(r["op"], "x".join(map(str, r["shape"])))][r["kernel"]] = r["seconds"]

    print(f"active kernel: {kernels.BACKEND}")
    print(f"{'op':<13} {'shape':<12} {'compiled ms':>12} {'python ms':>10} {'speedup':>8}")
    for (op, shape), t in table.items():
        comp = t.get("compiled")
        py = t["python"]
        comp_ms = f"{comp * 1e3:12.3f}" if comp else f"{'n/a':>12}"
        speed = f"{py / comp:8.1f}" if comp else f"{'':>8}"
        print(f"{op:<13} {shape:<12} {comp_ms} {py * 1e3:10.3f} {speed}")


if __name__ == "__main__":
    main()
