#!/usr/bin/env python3
"""Compare the compiled and pure-Python simulation kernels.

Times the full run (noise generation + stepping) and the stepping alone
for a single-replicate trajectory and a replicate ensemble.  The
single-replicate case isolates kernel overhead; ensembles amortize the
Python kernel's per-step cost across replicates, so its gap shrinks
there while the compiled kernel still wins.

Run:  python benchmarks/benchmark_kernels.py [--horizon 100000]
"""

import argparse
import time

import numpy as np

from cinest import _kernels
from cinest.estimator import EstimatorConfig, run, run_ensemble
from cinest.graphs import ring_khop_graph
from cinest.noise import NoiseModel
from cinest.nonlinearities import Sign


def time_call(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--horizon", type=int, default=100_000)
    parser.add_argument("--agents", type=int, default=10)
    parser.add_argument("--replicates", type=int, default=64)
    args = parser.parse_args()

    g = ring_khop_graph(args.agents, 1)
    noise = NoiseModel.heavy_tail(2.05)
    nl = Sign()

    def config(reps):
        return EstimatorConfig(
            a=1.0, b=1.0, delta=1.0, horizon=args.horizon, replicates=reps,
            seed=0, theta_star=[1.0], obs_vectors=np.ones((args.agents, 1)))

    backends = _kernels.available_backends()
    print(f"backends: {', '.join(backends)}   "
          f"(horizon {args.horizon}, {args.agents}-agent ring)\n")

    scenarios = [
        ("single replicate", lambda be: run(
            config(1), g, nl, nl, noise, noise, 0, backend=be)),
        (f"ensemble x{args.replicates}", lambda be: run_ensemble(
            config(args.replicates), g, nl, nl, noise, noise, backend=be)),
    ]

    print(f"{'scenario':<22}{'backend':<12}{'wall s':>10}{'steps/s':>14}")
    for label, fn in scenarios:
        reps = 1 if label.startswith("single") else args.replicates
        base = None
        for be in backends:
            wall = time_call(lambda: fn(be), repeats=2)
            rate = args.horizon * reps / wall
            note = ""
            if base is None:
                base = wall
            else:
                note = f"   ({wall / base:.1f}x slower than {backends[0]})"
            print(f"{label:<22}{be:<12}{wall:>10.3f}{rate:>14.3g}{note}")
        print()


if __name__ == "__main__":
    main()
