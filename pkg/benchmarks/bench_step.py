"""Benchmark the semigroup step kernels: compiled extension vs numpy fallback.

Usage: python benchmarks/bench_step.py [--steps N]
"""

import argparse
import math
import time

import numpy as np

from contactkam import kernels
from contactkam.grids import PeriodicGrid
from contactkam.models import make_model
from contactkam.semigroup import StepOperator

CASES = [
    ("1d manufactured n=512 n_v=33", "manufactured", (1.0,), (512,), 2e-3, 33, 3.0, {}),
    ("1d pendulum     n=512 n_v=33", "pendulum_dissipative", (2 * math.pi,), (512,), 2e-3, 33, 8.0, {"p0": 2.0}),
    ("2d quadratic    n=48^2 n_v=9^2", "quadratic_contact", (1.0, 1.0), (48, 48), 1e-3, 9, 2.0, {}),
]


def time_backend(backend, family, lengths, n, dt, n_v, v_max, params, steps):
    grid = PeriodicGrid(n, lengths)
    model = make_model(family, circle_lengths=lengths, v_max=v_max, **params)
    op = StepOperator(model, grid, dt, "backward", n_v=n_v, v_max=v_max, backend=backend)
    rng = np.random.default_rng(0)
    vals = rng.standard_normal(grid.n) * 0.1
    op.apply(vals)  # warm up
    t0 = time.perf_counter()
    cur = vals
    for _ in range(steps):
        cur = op.apply(cur)
    return (time.perf_counter() - t0) / steps


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=200)
    args = parser.parse_args()

    backends = ["python"] + (["compiled"] if kernels.HAVE_COMPILED else [])
    if not kernels.HAVE_COMPILED:
        print("note: compiled extension not built; benchmarking the fallback only")
    print(f"{args.steps} backward steps per case\n")
    header = f"{'case':34s}" + "".join(f"{b:>14s}" for b in backends) + f"{'speedup':>10s}"
    print(header)
    print("-" * len(header))
    for name, family, lengths, n, dt, n_v, v_max, params in CASES:
        per = {
            b: time_backend(b, family, lengths, n, dt, n_v, v_max, params, args.steps)
            for b in backends
        }
        row = f"{name:34s}" + "".join(f"{per[b] * 1e3:11.3f} ms" for b in backends)
        if "compiled" in per:
            row += f"{per['python'] / per['compiled']:9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
