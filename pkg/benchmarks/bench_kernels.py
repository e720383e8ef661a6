"""Time the compiled and pure-Python kernels on the same inputs.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per (kernel, size, backend) with the best wall time over
the repeats, plus the end-to-end time of a plain Frank-Wolfe run on
P-means, whose objective calls ``ball_mass_table`` on every evaluation.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from probfw import kernels


def _inputs(n, d, seed=0):
    gen = np.random.default_rng(seed)
    pts = gen.uniform(0, 1, size=(n, d))
    pts = np.ascontiguousarray(pts[np.lexsort(pts.T[::-1])])
    w = gen.dirichlet(np.ones(n))
    centers = np.ascontiguousarray(gen.uniform(0, 1, size=(64, d)))
    radii = np.ascontiguousarray(np.sort(gen.uniform(0, 1, size=256)))
    return pts, w, centers, radii


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(repeat):
    found = kernels.backends()
    for n, d in ((200, 1), (2000, 1), (2000, 2)):
        pts, w, centers, radii = _inputs(n, d)
        for name, mod in found.items():
            t_sweep = _best(lambda: mod.sweep_labels(pts, 1e-3), repeat)
            t_ball = _best(lambda: mod.ball_mass_table(pts, w, centers, radii), repeat)
            print(f"sweep_labels     n={n:5d} d={d} {name:7s} {t_sweep * 1e3:9.3f} ms")
            print(f"ball_mass_table  n={n:5d} d={d} {name:7s} {t_ball * 1e3:9.3f} ms")


_SOLVE = (
    "import time\n"
    "from probfw import kernels\n"
    "from probfw.instances import build_pmeans\n"
    "from probfw.solvers import run_dfw, SolverConfig\n"
    "p = build_pmeans([0.25, 0.75])\n"
    "t = time.perf_counter(); run_dfw(p, None, SolverConfig(max_iters=300, gap_every=0))\n"
    "print(kernels.BACKEND, time.perf_counter() - t)\n"
)


def bench_solver():
    for flag in ("0", "1"):
        env = dict(os.environ, PROBFW_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", _SOLVE], env=env, capture_output=True, text=True, check=True)
        name, secs = out.stdout.split()
        print(f"dfw pmeans K=300          {name:7s} {float(secs) * 1e3:9.1f} ms")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    bench_kernels(args.repeat)
    bench_solver()


if __name__ == "__main__":
    main()
