"""Benchmark the compiled scan against the numpy fallback.

The scalar state recursion is where simulation time goes; this script times
both backends on a workload shaped like a localized-moment run (many
replications, fine steps between recorded nodes).

Run:  python benchmarks/bench_core.py [--reps 256] [--steps 200000] [--segment 512]
"""

import argparse
import time

import numpy as np


def build_workload(reps: int, steps: int, segment: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    phi = np.exp(rng.uniform(-0.03, -0.001, steps))
    segments = [(lo, min(lo + segment, steps)) for lo in range(0, steps, segment)]
    etas = [np.ascontiguousarray(rng.standard_normal((hi - lo, reps))) for lo, hi in segments]
    return phi, segments, etas


def run(scan, phi, segments, etas, reps: int) -> tuple[np.ndarray, float]:
    x = np.zeros(reps)
    t0 = time.perf_counter()
    for (lo, hi), eta in zip(segments, etas):
        scan(np.ascontiguousarray(phi[lo:hi]), eta, x)
    return x, time.perf_counter() - t0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=256)
    parser.add_argument("--steps", type=int, default=200_000)
    parser.add_argument("--segment", type=int, default=512)
    args = parser.parse_args()

    from locstat._core import _fallback

    backends = {"fallback": _fallback.scan_segment}
    try:
        from locstat._core import _recursion

        backends["compiled"] = _recursion.scan_segment
    except ImportError:
        print("compiled core unavailable; timing fallback only")

    phi, segments, etas = build_workload(args.reps, args.steps, args.segment)
    cells = args.reps * args.steps
    results = {}
    for name, scan in backends.items():
        run(scan, phi, segments, etas, args.reps)  # warm up
        x, elapsed = run(scan, phi, segments, etas, args.reps)
        results[name] = (x, elapsed)
        print(f"{name:9s} {elapsed * 1e3:9.2f} ms   {cells / elapsed / 1e6:9.1f} Mcells/s")

    if len(results) == 2:
        xa, ta = results["fallback"]
        xb, tb = results["compiled"]
        rel = np.max(np.abs(xa - xb) / np.maximum(np.abs(xa), 1e-12))
        print(f"speedup (fallback/compiled): {ta / tb:.2f}x   max rel diff: {rel:.2e}")


if __name__ == "__main__":
    main()
