"""Numpy vs numba timings for the batched kernels and one full grid reconstruction.

    python3 benchmarks/bench_kernels.py [--batch 561] [--repeat 20]

Set GENDEV_NUMBA=1 to make numba the default backend elsewhere; this script
times both explicitly.
"""
import argparse
import time

import numpy as np

from gendev import kernels, problems
from gendev.reconstruct import reconstruct_grid


def inputs(batch: int, n: int, rng: np.random.Generator):
    a = rng.standard_normal((batch, n, n))
    g = a @ np.swapaxes(a, 1, 2) + n * np.eye(n)
    ginv = np.linalg.inv(g)
    dg = rng.standard_normal((batch, n, n, n))
    dg = dg + np.swapaxes(dg, 2, 3)
    d2g = rng.standard_normal((batch, n, n, n, n))
    d2g = d2g + np.swapaxes(d2g, 1, 2)
    d2g = d2g + np.swapaxes(d2g, 3, 4)
    frames = rng.standard_normal((batch, n, n))
    vel = rng.standard_normal((batch, n))
    coupling = rng.standard_normal((batch, n, n))
    coupling = coupling - np.swapaxes(coupling, 1, 2)
    return g, ginv, dg, d2g, frames, vel, coupling


def time_call(fn, repeat: int) -> float:
    fn()                                    # warm-up (includes numba compilation)
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def bench_kernels(batch: int, n: int, repeat: int) -> None:
    rng = np.random.default_rng(0)
    g, ginv, dg, d2g, frames, vel, coupling = inputs(batch, n, rng)
    impls = {"numpy": kernels.numpy_impl}
    if kernels.HAVE_NUMBA:
        impls["numba"] = kernels.numba_impl
    for name in ("christoffel", "christoffel_derivative", "riemann_lower", "frame_rhs",
                 "tensor4_in_frame"):
        row = []
        for label, impl in impls.items():
            gam = impl.christoffel(ginv, dg)
            dgam = impl.christoffel_derivative(ginv, dg, d2g)
            args = {
                "christoffel": (ginv, dg),
                "christoffel_derivative": (ginv, dg, d2g),
                "riemann_lower": (g, gam, dgam),
                "frame_rhs": (gam, vel, frames, coupling),
                "tensor4_in_frame": (impl.riemann_lower(g, gam, dgam), frames),
            }[name]
            fn = getattr(impl, name)
            row.append(f"{label} {1e6 * time_call(lambda: fn(*args), repeat):9.1f} us")
        print(f"{name:24s} n={n} K={batch}: " + " | ".join(row))


def bench_grid() -> None:
    problem = problems.sphere()
    for label in ("numpy", "numba") if kernels.HAVE_NUMBA else ("numpy",):
        kernels.use_backend(label)
        reconstruct_grid(problem, [(0.5, 2.5), (-1, 1)], (3, 3))      # warm-up
        start = time.perf_counter()
        sample = reconstruct_grid(problem, [(0.1, np.pi - 0.1), (-3, 3)], (33, 17))
        took = time.perf_counter() - start
        print(f"sphere 33x17 reconstruction [{label}]: {took:6.2f} s, "
              f"{int(sample.valid.sum())} valid points")
    kernels.use_backend("numpy")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=561)
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--skip-grid", action="store_true")
    args = parser.parse_args()
    if not kernels.HAVE_NUMBA:
        print("numba is not installed; timing the numpy backend only")
    for n in (2, 3, 4):
        bench_kernels(args.batch, n, args.repeat)
    if not args.skip_grid:
        bench_grid()


if __name__ == "__main__":
    main()
