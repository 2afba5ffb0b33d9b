"""Timing comparison of the numpy and numba kernel backends.

Run:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from isingvi import HAS_NUMBA, generate_topology, get_backend, set_backend
from isingvi.bp import bp_iterate
from isingvi.meanfield import mf_iterate
from isingvi.oracle import exact_log_z


def _time(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    cases = [
        ("grid 20x20", generate_topology("grid", 0.3, 0.1, rows=20, cols=20), 500),
        ("grid 40x40", generate_topology("grid", 0.3, 0.1, rows=40, cols=40), 500),
        ("regular n=500 d=4", generate_topology("random_regular", 0.2, 0.1,
                                                n=500, degree=4, seed=1), 500),
    ]
    exact_model = generate_topology("grid", 0.3, 0.1, rows=4, cols=5)

    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    if not HAS_NUMBA:
        print("numba unavailable, timing numpy only")
    results = []
    for backend in backends:
        set_backend(backend)
        # warm-up triggers jit compilation so it stays out of the timings
        bp_iterate(cases[0][1], max_steps=3, tol=0.0)
        mf_iterate(cases[0][1], max_steps=3, tol=0.0)
        exact_log_z(exact_model)
        for label, model, steps in cases:
            tb = _time(lambda: bp_iterate(model, max_steps=steps, tol=0.0,
                                          record=False))
            tm = _time(lambda: mf_iterate(model, max_steps=steps, tol=0.0,
                                          record=False))
            results.append((backend, f"bp {label} x{steps}", tb))
            results.append((backend, f"mf {label} x{steps}", tm))
        te = _time(lambda: exact_log_z(exact_model))
        results.append((backend, "exact grid 4x5 (2^20 states)", te))

    print(f"{'backend':8s} {'case':34s} {'seconds':>10s}")
    for backend, label, secs in results:
        print(f"{backend:8s} {label:34s} {secs:10.4f}")
    if len(backends) == 2:
        print()
        numpy_times = {l: s for b, l, s in results if b == "numpy"}
        for b, label, secs in results:
            if b == "numba" and secs > 0:
                print(f"speedup {label:34s} {numpy_times[label] / secs:8.2f}x")
    set_backend(get_backend())


if __name__ == "__main__":
    main()
