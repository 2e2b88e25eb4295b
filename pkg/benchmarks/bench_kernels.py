"""Time the Blahut-Arimoto and Lagrangian kernels under numba and plain numpy.

    python benchmarks/bench_kernels.py [--z 64] [--x 400] [--repeat 20]

Both backends are called through the same dispatch function, so the timings
include the identical Python-side setup.
"""
import argparse
import time

import numpy as np

from stspbo import kernels
from stspbo._accel import HAS_NUMBA


def _time(fn, repeat):
    fn()  # warm-up (triggers compilation for numba)
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--z", type=int, default=64)
    ap.add_argument("--x", type=int, default=400)
    ap.add_argument("--k-max", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--beta", type=float, default=0.1)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    g = rng.normal(size=(args.z, args.x)).cumsum(axis=1) * 30.0
    dist = (g.max(axis=1, keepdims=True) - g) ** 2
    w = np.full(args.z, 1.0 / args.z)
    p0 = np.full((args.z, args.x), 1.0 / args.x)

    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    results = {}
    for b in backends:
        # tol=0 forces all k_max iterations so both backends do equal work
        t_ba = _time(lambda: kernels.ba_iterate(dist, args.beta, w, p0, args.k_max, 0.0,
                                                backend=b), args.repeat)
        t_lg = _time(lambda: kernels.lagrangian_terms(dist, args.beta, w, p0, backend=b),
                     args.repeat)
        results[b] = (t_ba, t_lg)
        print(f"{b:6s}  ba_iterate {t_ba * 1e3:8.3f} ms   lagrangian {t_lg * 1e3:8.3f} ms")
    if len(results) == 2:
        p_np = kernels.ba_iterate(dist, args.beta, w, p0, args.k_max, 0.0, backend="numpy")[0]
        p_nb = kernels.ba_iterate(dist, args.beta, w, p0, args.k_max, 0.0, backend="numba")[0]
        print(f"speedup ba_iterate x{results['numpy'][0] / results['numba'][0]:.2f}, "
              f"lagrangian x{results['numpy'][1] / results['numba'][1]:.2f}; "
              f"max |diff| {np.max(np.abs(p_np - p_nb)):.2e}")
    else:
        print("numba unavailable or disabled; only the numpy backend was timed")


if __name__ == "__main__":
    main()
