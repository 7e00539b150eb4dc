"""Benchmark the numba kernel lane against the pure-numpy fallback.

Times the three hot kernels on representative problem sizes and prints
per-call timings plus the speedup.  Run after an editable install:

    python benchmarks/bench_kernels.py [--repeats 200]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from yamabelab import kernels
from yamabelab.grid import build_periodic_grid, build_radial_grid


def time_call(fn, *args, repeats=200):
    fn(*args)  # warm-up (and JIT compilation for the numba lane)
    best = math.inf
    for _ in range(5):
        start = time.perf_counter()
        for _ in range(repeats):
            fn(*args)
        best = min(best, (time.perf_counter() - start) / repeats)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description="kernel lane shoot-out")
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--radial-nodes", type=int, default=6000)
    parser.add_argument("--torus-axis", type=int, default=24)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    g_rad = build_radial_grid(3, 40.0, args.radial_nodes, 2.0)
    g_tor = build_periodic_grid(3, 2.0 * math.pi, args.torus_axis)
    u_rad = rng.standard_normal(g_rad.node_count)
    u_tor = rng.standard_normal(g_tor.node_count)
    w = rng.uniform(0.1, 1.0, size=g_rad.node_count)
    cases = [
        ("stiffness_apply_radial", (g_rad.stiffness_cells, u_rad)),
        ("stiffness_apply_periodic", (u_tor, g_tor.neighbor_table, 0.25)),
        ("abs_power_sum", (u_rad, w, 6.0)),
        ("abs_power_grad", (u_rad, w, 6.0)),
    ]

    lanes = ["numpy"] + (["numba"] if kernels.HAS_NUMBA else [])
    print(f"active lane: {kernels.ACTIVE_LANE}   repeats: {args.repeats}")
    print(f"radial nodes: {g_rad.node_count}   torus nodes: {g_tor.node_count}")
    print(f"{'kernel':28s} " + " ".join(f"{ln:>12s}" for ln in lanes) + "   speedup")
    for name, call_args in cases:
        times = {}
        for lane in lanes:
            impl = kernels.lane_impls(lane)[name]
            times[lane] = time_call(impl, *call_args, repeats=args.repeats)
        row = f"{name:28s} " + " ".join(f"{times[ln] * 1e6:10.1f}us" for ln in lanes)
        if "numba" in times:
            row += f"   {times['numpy'] / times['numba']:6.2f}x"
        print(row)


if __name__ == "__main__":
    main()
