"""Compare the numba and numpy backends of the hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Prints one line per kernel and size with the best-of-``repeat`` wall time of
each backend, their ratio and the largest difference between the outputs.
The numba column is skipped when numba is unavailable or disabled with
``CURVESOLVE_NUMBA=0``.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from curvesolve import _accel, ambient, kernels
from curvesolve.grid import Grid
from curvesolve.hypersurface import ambient_samples


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def geometry_case(kind, grid):
    m = ambient.builtin(kind, grid.dim_n)
    x = grid.nodes
    u = 0.8 + 0.05 * np.cos(x[:, -1]) * (np.sin(x[:, 0]) if grid.dim_n == 2 else 1.0)
    p, q = grid.derivatives(u)
    args = (p, q, *ambient_samples(m, u, x))

    def run(backend):
        return lambda: kernels.graph_geometry(*args, backend=backend)
    return run


def geodesic_case(kind, grid):
    m = ambient.builtin(kind, grid.dim_n)
    x = np.column_stack([np.full(grid.size, 0.8), grid.nodes])
    w = np.zeros_like(x)
    w[:, 0] = -1.0
    w[:, -1] = 0.01

    def run(backend):
        return lambda: kernels.geodesic_rk4(x, w, 0.05, 64, kind, m.warp.f, m.warp.df,
                                            backend=backend)
    return run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    have_numba = _accel.USE_NUMBA
    if have_numba:
        kernels.warmup()
    cases = [
        ("graph_geometry", "n=1 N=256", geometry_case("sphere_polar", Grid(1, 256))),
        ("graph_geometry", "n=1 N=4096", geometry_case("sphere_polar", Grid(1, 4096))),
        ("graph_geometry", "n=2 16x32", geometry_case("sphere_polar", Grid(2, 32, 16))),
        ("graph_geometry", "n=2 64x128", geometry_case("sphere_polar", Grid(2, 128, 64))),
        ("geodesic_rk4", "n=1 N=256", geodesic_case("sphere_polar", Grid(1, 256))),
        ("geodesic_rk4", "n=2 16x32", geodesic_case("sphere_polar", Grid(2, 32, 16))),
    ]
    print(f"{'kernel':<16}{'case':<14}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}"
          f"{'max diff':>11}")
    for name, label, case in cases:
        t_np, out_np = best_time(case("numpy"), args.repeat)
        if have_numba:
            t_nb, out_nb = best_time(case("numba"), args.repeat)
            diff = max(float(np.max(np.abs(a - b))) for a, b in zip(out_np, out_nb))
            extra = f"{1e3 * t_nb:12.3f}{t_np / t_nb:9.1f}{diff:11.1e}"
        else:
            extra = f"{'-':>12}{'-':>9}{'-':>11}"
        print(f"{name:<16}{label:<14}{1e3 * t_np:12.3f}{extra}")


if __name__ == "__main__":
    main()
