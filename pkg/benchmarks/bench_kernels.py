"""Compiled vs pure-Python composition kernels.

Usage: python3 benchmarks/bench_kernels.py [--events N] [--points M] [--repeat R]

Times ``compose`` on a random chain for a single point (the sampler's inner
loop) and for a batch of points, and checks both backends agree.
"""

import argparse
import timeit

import numpy as np

from alelab import _kernels_py
from alelab.core import slit_geometry

try:
    from alelab import _kernels
except ImportError:
    _kernels = None


def random_chain(n, rng):
    caps = rng.uniform(1e-3, 2e-2, n)
    rot = np.exp(1j * rng.uniform(-np.pi, np.pi, n))
    geo = [slit_geometry(c) for c in caps]
    h = np.array([g.h for g in geo])
    y0 = np.array([g.y0 for g in geo])
    cb = np.array([np.cos(g.half_arc) for g in geo])
    return rot, h, y0, cb


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--events", type=int, default=2000)
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    rot, h, y0, cb = random_chain(args.events, rng)
    one = np.array([1.3 * np.exp(0.4j)])
    batch = (1.0 + rng.uniform(0.01, 1.0, args.points)) * np.exp(1j * rng.uniform(-np.pi, np.pi, args.points))
    backends = {"python": _kernels_py.compose}
    if _kernels is not None:
        backends["cython"] = _kernels.compose
    else:
        print("compiled extension not built; timing the Python fallback only")
    print(f"chain of {args.events} slits, batch of {args.points} points, best of {args.repeat}")
    times = {}
    for name, fn in backends.items():
        t1 = min(timeit.repeat(lambda: fn(one, rot, h, y0, cb, True), number=5, repeat=args.repeat)) / 5
        tb = min(timeit.repeat(lambda: fn(batch, rot, h, y0, cb, True), number=1, repeat=args.repeat))
        times[name] = (t1, tb)
        print(f"{name:>7s}: single point {t1 * 1e3:9.3f} ms   batch {tb * 1e3:9.2f} ms")
    if len(backends) == 2:
        a = backends["python"](batch, rot, h, y0, cb, True)
        b = backends["cython"](batch, rot, h, y0, cb, True)
        err = max(float(np.max(np.abs(x - y) / np.maximum(1.0, np.abs(x)))) for x, y in zip(a, b))
        print(f"speed-up: single {times['python'][0] / times['cython'][0]:.1f}x, "
              f"batch {times['python'][1] / times['cython'][1]:.1f}x; max relative difference {err:.2e}")


if __name__ == "__main__":
    main()
