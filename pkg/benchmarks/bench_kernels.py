"""Timing comparison of the numba and pure-numpy kernel backends.

Runs the three batch kernels on a large simplex sample with the current
backend, then re-runs the same workload in a subprocess with
``ORDELIC_NUMBA=0`` and prints both timings side by side.

Usage: python3 benchmarks/bench_kernels.py [--batch 200000] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

GRID = [0.0, 0.5, 1.0, 2.0, 3.0]
NODES = [
    [0.0, 1.0, 1.0, 1.0, 2.0],
    [-3.0, -3.0, 0.0, 0.5, 1.75],
    [-2.5, -2.0, -1.75, -1.5, 0.0],
]
SQ14 = 14.0 ** 0.5
NORMALS = [[-1 / SQ14, 3 / SQ14, 2 / SQ14], [-2 / SQ14, -1 / SQ14, 3 / SQ14]]


def run_workload(batch: int, repeat: int) -> dict:
    from ordelic._kernels import (
        backend_name,
        node_root_batch,
        region_index_batch,
        roe_batch,
    )
    from ordelic.simplex import sample_simplex

    bp = np.array(GRID)
    nodes = np.array(NODES)
    normals = np.array(NORMALS)
    probs = sample_simplex(3, batch, seed=0)

    # warm-up compiles the jitted paths so timings measure steady state
    node_root_batch(bp, nodes, probs[:10])
    roe_batch(normals, probs[:10])
    region_index_batch(normals, probs[:10])

    out = {"backend": backend_name(), "batch": batch, "repeat": repeat}
    for name, fn in (
        ("node_root_batch", lambda: node_root_batch(bp, nodes, probs)),
        ("roe_batch", lambda: roe_batch(normals, probs)),
        ("region_index_batch", lambda: region_index_batch(normals, probs)),
    ):
        best = min(_timed(fn) for _ in range(repeat))
        out[name] = best
    return out


def _timed(fn) -> float:
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--emit-json", action="store_true",
                        help="print one JSON object and exit (subprocess mode)")
    args = parser.parse_args()

    if args.emit_json:
        print(json.dumps(run_workload(args.batch, args.repeat)))
        return 0

    here = run_workload(args.batch, args.repeat)
    env = dict(os.environ, ORDELIC_NUMBA="0")
    proc = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--batch", str(args.batch),
         "--repeat", str(args.repeat), "--emit-json"],
        capture_output=True, text=True, env=env, check=True)
    numpy_side = json.loads(proc.stdout)

    print(f"batch={args.batch} repeat={args.repeat} "
          f"(best-of-{args.repeat} seconds)")
    print(f"{'kernel':<22}{here['backend']:>12}{numpy_side['backend']:>12}"
          f"{'speedup':>10}")
    for name in ("node_root_batch", "roe_batch", "region_index_batch"):
        a, b = here[name], numpy_side[name]
        ratio = b / a if a > 0 else float("inf")
        print(f"{name:<22}{a:>12.4f}{b:>12.4f}{ratio:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
