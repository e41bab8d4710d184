#!/usr/bin/env python3
"""Benchmark: compiled kernel core vs the pure-NumPy fallback.

Times the hot kernels on representative workloads plus two end-to-end
solves.  Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from ofdmalloc import gains_from_taps, generate_random_channel
from ofdmalloc._kernels import _fallback

try:
    from ofdmalloc._kernels import _core
except ImportError:
    _core = None

LN2 = np.log(2.0)


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(gains, mu, lam, targets, repeats=30):
    from ofdmalloc.minpower import carrier_orders

    a = np.ascontiguousarray(gains.noise_over_gain())
    order = carrier_orders(gains)
    om = np.ascontiguousarray(order.matrix(gains.K))
    rk = np.ascontiguousarray(order.ranks(gains.K))
    rows = []
    backends = [("python", _fallback)] + ([("compiled", _core)] if _core else [])

    def add(name, make):
        times = {}
        for bname, mod in backends:
            fn = make(mod)
            fn()  # warm up
            times[bname] = timeit(fn, repeats)
        rows.append((name, times))

    add("total_power_at_price", lambda mod: lambda: mod.total_power_at_price(a, mu, lam))
    add("wsr_rates_powers", lambda mod: lambda: mod.wsr_rates_powers(a, mu, lam))

    def make_sweep(mod):
        R = np.zeros((gains.M, gains.K))
        levels = np.full(gains.M, -np.inf)
        return lambda: mod.minpower_sweep(a, om, rk, targets, R, levels)

    add("minpower_sweep", make_sweep)

    def make_mr(mod):
        R = np.zeros((gains.M, gains.K))
        levels = np.full(gains.M, -np.inf)
        return lambda: mod.minrates_sweep(a, om, rk, mu, targets, lam, R, levels)

    add("minrates_sweep", make_mr)
    return rows


def bench_solvers(gains, mu, targets, p_budget, repeats=3):
    import importlib
    import os

    rows = []
    for backend in ["python"] + (["compiled"] if _core else []):
        os.environ["OFDMALLOC_BACKEND"] = {"python": "py", "compiled": "c"}[backend]
        import ofdmalloc._kernels as kmod

        importlib.reload(kmod)
        import ofdmalloc.wsr as wsr_mod
        import ofdmalloc.minpower as mp_mod
        import ofdmalloc.minrates as mr_mod

        importlib.reload(wsr_mod)
        importlib.reload(mp_mod)
        importlib.reload(mr_mod)
        t_wsr = timeit(lambda: wsr_mod.solve_wsr(gains, mu, p_budget), repeats)
        t_mp = timeit(lambda: mp_mod.solve_minpower(gains, targets), repeats)
        problem = mr_mod.MinRatesProblem(gains=gains, mu=mu, targets=targets, p_budget=p_budget)
        t_mr = timeit(lambda: mr_mod.solve_minrates_waterfill(problem), repeats)
        rows.append((backend, t_wsr, t_mp, t_mr))
    os.environ.pop("OFDMALLOC_BACKEND", None)
    return rows


def main():
    print(f"compiled core available: {_core is not None}")
    taps = generate_random_channel(4, 128, 8, seed=1)
    gains = gains_from_taps(taps)
    mu = np.array([0.35, 0.4, 0.1, 0.15])
    targets = np.array([2.5, 0.4, 0.8, 2.0]) * LN2
    lam = 0.05
    p_budget = gains.K * gains.sigma2 * 10.0

    print(f"\nkernels on M={gains.M}, K={gains.K} (best of 30):")
    rows = bench_kernels(gains, mu, lam, targets)
    for name, times in rows:
        line = f"  {name:22s}"
        for bname, t in times.items():
            line += f"  {bname}={t * 1e6:9.1f} us"
        if "compiled" in times and times["compiled"] > 0:
            line += f"  speedup={times['python'] / times['compiled']:6.1f}x"
        print(line)

    print("\nend-to-end solves (best of 3):")
    for backend, t_wsr, t_mp, t_mr in bench_solvers(gains, mu, targets, p_budget):
        print(
            f"  {backend:9s}  solve_wsr={t_wsr * 1e3:8.2f} ms"
            f"  solve_minpower={t_mp * 1e3:8.2f} ms"
            f"  solve_minrates_waterfill={t_mr * 1e3:8.2f} ms"
        )


if __name__ == "__main__":
    main()
