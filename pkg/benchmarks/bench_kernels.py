"""Compare the compiled propagator sweep with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--samples 4096] [--repeat 3]
"""

import argparse
import time

import numpy as np

from phstab import kernels
from phstab.fixtures import load_fixture, random_problem
from phstab.propagator import coefficients, t_grid


def cases():
    yield "example_4_3", load_fixture("example_4_3")
    for seed in (1, 7, 11):
        p = random_problem(seed)
        yield f"random:{seed} (d={p.d}, pieces={p.hamiltonian.n_pieces})", p


def timed(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    if kernels.BACKEND != "cython":
        print("compiled extension not available; only the fallback can run")
    print(f"{'case':40s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for name, p in cases():
        a, b, lengths = coefficients(p.hamiltonian, p.p1, p.p0)
        ts = t_grid(100.0, args.samples)
        run = lambda be: kernels.sweep(a, b, lengths, ts, backend=be, workers=args.workers)  # noqa: E731
        t_py, (phi_py, _) = timed(lambda: run("python"), args.repeat)
        if kernels.BACKEND == "cython":
            t_cy, (phi_cy, _) = timed(lambda: run("cython"), args.repeat)
            diff = np.abs(phi_cy - phi_py).max()
            print(f"{name:40s} {t_py:11.3f} {t_cy:11.3f} {t_py / t_cy:8.2f} {diff:10.2e}")
        else:
            print(f"{name:40s} {t_py:11.3f} {'-':>11s}")


if __name__ == "__main__":
    main()
