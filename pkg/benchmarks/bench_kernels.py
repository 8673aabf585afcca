"""Compare the compiled and pure-Python mesh kernels on catenoid meshes.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3] [--resolution 400 200]
"""
import argparse
import time

import numpy as np

from warplab import kernels
from warplab.immersion import builtin_example, mesh


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--resolution", type=int, nargs="+", default=[400, 200])
    args = ap.parse_args()

    if kernels.compiled_backend is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")

    name = "catenoid" if len(args.resolution) == 2 else "higher_catenoid"
    Mh = mesh(builtin_example(name), tuple(args.resolution))
    radii = np.linspace(2.0, min(20.0, Mh.horizon - 1.0), 37)
    S, r = Mh.simplices, Mh.r
    print(f"{name} mesh {tuple(args.resolution)}: {len(r)} vertices, {len(S)} simplices")

    py, cy = kernels.python_backend, kernels.compiled_backend
    rows = [
        ("clip_level", lambda k: [k.clip_level(S, r, t) for t in radii[::4]]),
        ("complement_counts", lambda k: k.complement_counts(S, r, radii)),
    ]
    print(f"{'kernel':<20}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for label, job in rows:
        tp = best_of(lambda: job(py), args.repeat)
        tc = best_of(lambda: job(cy), args.repeat)
        print(f"{label:<20}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}")


if __name__ == "__main__":
    main()
