#!/usr/bin/env python3
"""Benchmark the numba-compiled kernels against the pure-Python fallback.

Runs each hot kernel under both backends (child processes, since the backend
is chosen at import time via ACKTRACK_NUMBA) and prints a timing table.

Usage: python benchmarks/bench_backends.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOADS = ("kinematic_rollout", "mpc_solve", "ekf_chain")

_CHILD = r"""
import json
import sys
import time

import numpy as np

from acktrack import backend_name, kernels

repeat = int(sys.argv[1])


def time_best(fn, number):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(number)
        best = min(best, time.perf_counter() - t0)
    return best


def kinematic_rollout(number):
    kernels.kinematic_rollout(0.0, 0.0, 0.0, 0.22, 5.0, 0.0, 0.01, number,
                              2.258, 0.524, True)


def mpc_solve(number):
    coeffs = np.array([0.5, 0.1, -0.01, 0.002])
    state0 = np.array([0.0, 0.0, 0.05, 0.5, -0.0997])
    u0 = np.zeros(9)
    for _ in range(number):
        kernels.mpc_solve_pgd(u0, coeffs, state0, 5.0, 2.258, 0.1,
                              2000.0, 2000.0, 5.0, 200.0, 0.436, 100, 1e-6)


def ekf_chain(number):
    v = np.full(number, 2.78)
    w = np.full(number, 0.09)
    z = np.zeros(number // 16 + 1)
    kernels.ekf_chain(np.zeros(3), np.eye(3) * 1e-6, v, w, 0.01,
                      1e-3, 2e-3, z, 16, 0.0169)


workloads = {
    "kinematic_rollout": (kinematic_rollout, 100_000),
    "mpc_solve": (mpc_solve, 200),
    "ekf_chain": (ekf_chain, 100_000),
}

# warm-up pass compiles the kernels under numba so timings are steady-state
for fn, number in workloads.values():
    fn(min(number, 1000))

out = {"backend": backend_name()}
for name, (fn, number) in workloads.items():
    out[name] = {"seconds": time_best(fn, number), "number": number}
print(json.dumps(out))
"""


def run_backend(numba_on: bool, repeat: int) -> dict:
    env = dict(os.environ, ACKTRACK_NUMBA="1" if numba_on else "0")
    proc = subprocess.run([sys.executable, "-c", _CHILD, str(repeat)],
                          capture_output=True, text=True, env=env, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3,
                        help="timing repetitions per workload (best-of)")
    args = parser.parse_args()

    results = {}
    for numba_on in (True, False):
        r = run_backend(numba_on, args.repeat)
        results[r["backend"]] = r
        print(f"measured backend: {r['backend']}", file=sys.stderr)
    if "numba" not in results:
        print("warning: numba backend unavailable, nothing to compare",
              file=sys.stderr)
        return 1

    print(f"{'kernel':<20} {'n':>8} {'numpy [s]':>12} {'numba [s]':>12} "
          f"{'speedup':>9}")
    for name in WORKLOADS:
        plain = results["numpy"][name]["seconds"]
        fast = results["numba"][name]["seconds"]
        n = results["numba"][name]["number"]
        print(f"{name:<20} {n:>8} {plain:>12.4f} {fast:>12.4f} "
              f"{plain / fast:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
