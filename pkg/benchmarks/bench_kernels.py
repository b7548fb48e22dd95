"""Compare the numba and numpy RK4 kernels on the nonlinear similarity flow.

    python benchmarks/bench_kernels.py --N 32 48 64 --tau 2
"""

import argparse
import time

import numpy as np

from blowlab import _kernels
from blowlab.coords import CoordChart, HeightFunction
from blowlab.discretize import build_grid
from blowlab.evolve import PerturbationSpec, initial_data, integrate, timestep
from blowlab.linops import assemble_L
from blowlab.models import Model


def bench(N, tau, use_numba, repeats=3):
    m = Model("wm", 5)
    h = HeightFunction.standard()
    chart = CoordChart(h)
    g = build_grid(chart.R, N)
    L = assemble_L(g, m, h)
    u0 = initial_data(m, chart, PerturbationSpec("bump", 1e-3, 0.5), 1.0, g)
    dt = timestep(g, h, L)
    # warm-up compiles the jitted kernel
    integrate(L, m, h, g, u0, 10 * dt, dt, nonlinear=True, use_numba=use_numba)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        traj = integrate(L, m, h, g, u0, tau, dt, nonlinear=True, use_numba=use_numba)
        best = min(best, time.perf_counter() - t0)
    return best, traj.final, int(round(tau / dt))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, nargs="+", default=[32, 48, 64])
    ap.add_argument("--tau", type=float, default=2.0)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        print("numba disabled or missing; timing the numpy kernel only")
    print(f"{'N':>4} {'steps':>7} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8} {'max diff':>10}")
    for N in args.N:
        t_np, u_np, steps = bench(N, args.tau, False, args.repeats)
        if _kernels.HAVE_NUMBA:
            t_nb, u_nb, _ = bench(N, args.tau, True, args.repeats)
            diff = float(np.max(np.abs(u_nb - u_np)))
            print(f"{N:>4} {steps:>7} {t_np:>10.3f} {t_nb:>10.3f} {t_np / t_nb:>8.1f} {diff:>10.2e}")
        else:
            print(f"{N:>4} {steps:>7} {t_np:>10.3f} {'-':>10} {'-':>8} {'-':>10}")


if __name__ == "__main__":
    main()
