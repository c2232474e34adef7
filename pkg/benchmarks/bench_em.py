"""Benchmark the numba kernels against the pure-numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_em.py

Times the tied-EM anchor, the levels EM, a full three-period fit, and a full
duration scan on one synthetic catalog, per backend.
"""

import time

import numpy as np

from eventimpact import _kernels
from eventimpact.catalog import StudyWindow
from eventimpact.duration import scan_durations
from eventimpact.misd import FitOptions, fit, period_index
from eventimpact.simulator import SimConfig, bin_to_days, simulate


def timeit(label, func, repeat=5):
    func()  # warm up (numba compilation)
    best = min(
        (lambda t0: (func(), time.perf_counter() - t0)[1])(time.perf_counter())
        for _ in range(repeat)
    )
    print(f"  {label:<28s} {best * 1e3:9.2f} ms")
    return best


def main():
    config = SimConfig(mu=3.0, decay_rate=0.25, levels=(0.2, 1.0, 0.4),
                       t_star=31.0, t_prime=61.0, horizon=100.0, seed=(1, 2))
    series = bin_to_days(simulate(config), 100)
    window = StudyWindow(t0=0, t_star=30, T=99, t_prime=60)
    c = series.values()
    per = period_index(len(series), window)
    pts = np.array([c[per == p].sum() for p in range(3)])
    L = 30
    g0 = np.full(L, 1.0 / L)

    results = {}
    for backend in ("numpy", "numba"):
        try:
            _kernels.active_backend(backend)
        except RuntimeError:
            print(f"{backend}: unavailable, skipping")
            continue
        print(f"backend = {backend}")
        options = FitOptions(backend=backend)
        times = {
            "tied EM (200 sweeps)": timeit(
                "tied EM (200 sweeps)",
                lambda: _kernels.em_tied(c, L, 100.0, 1.5, 0.5, g0, 0.0, 200,
                                         backend=backend),
            ),
            "levels EM (to tol)": timeit(
                "levels EM (to tol)",
                lambda: _kernels.em_levels(c, per, pts, 3.0, np.full(3, 0.3), g0,
                                           1e-4, 500, backend=backend),
            ),
            "three-period fit": timeit(
                "three-period fit", lambda: fit(series, window, options)
            ),
            "duration scan (69 fits)": timeit(
                "duration scan (69 fits)",
                lambda: scan_durations(series, window, options), repeat=3,
            ),
        }
        results[backend] = times
    if set(results) == {"numpy", "numba"}:
        print("speedup (numpy / numba):")
        for label in results["numba"]:
            ratio = results["numpy"][label] / results["numba"][label]
            print(f"  {label:<28s} {ratio:6.1f}x")


if __name__ == "__main__":
    main()
