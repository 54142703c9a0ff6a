#!/usr/bin/env python3
"""Benchmark the hot kernels: numba backend vs pure-numpy fallback.

Runs each kernel on representative grids and a full projection step on the
two preset grids, printing per-call times and the numba speedup.  Select the
backend under test for the end-to-end row with STNS_BACKEND; this script
imports both backend modules directly for the kernel rows.

Usage:
    python benchmarks/bench_kernels.py [--steps 10]
"""

import argparse
import time

import numpy as np

from stns.kernels import _numba, _numpy
from stns.mesh import BoundarySpec, GridSpec, make_domain, new_state
from stns.discretization import FluidParams
from stns.stepper import PropagatorSpec, projection_step
from stns.decomposition import SerialComm, whole_grid_subdomain


def _time(fn, repeat):
    fn()  # warm (jit compile / cache touch)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench_kernels(shape, repeat):
    nx, ny, nz = shape
    rng = np.random.default_rng(7)
    vel = lambda: rng.normal(size=(nx + 4, ny + 4, nz + 4))
    u, v, w = vel(), vel(), vel()
    p = rng.normal(size=(nx + 2, ny + 2, nz + 2))
    mask = np.ones((nx + 4, ny + 4, nz + 4), dtype=np.uint8)
    valid = (mask, mask, mask)
    out_u, out_v, out_w = np.zeros_like(u), np.zeros_like(v), np.zeros_like(w)
    out_p = np.zeros_like(p)
    h = (1.0 / nx, 1.0 / ny, 1.0 / nz)
    flat = rng.normal(size=nx * ny * nz)

    rows = []
    cases = [
        ("convective", lambda m: m.convective(
            u, v, w, *valid, *h, out_u, out_v, out_w)),
        ("diffusive", lambda m: m.diffusive(
            u, v, w, *valid, *h, 1e-3, out_u, out_v, out_w)),
        ("divergence", lambda m: m.divergence(u, v, w, mask, *h, out_p)),
        ("laplacian", lambda m: m.laplacian(p, mask, *h, out_p)),
        ("grad update", lambda m: m.pressure_gradient_update(
            u, v, w, p, *valid, 0.001, *h)),
        ("pairwise sum", lambda m: m.pairwise_sum(flat)),
    ]
    for name, call in cases:
        t_nb = _time(lambda: call(_numba), repeat)
        t_np = _time(lambda: call(_numpy), repeat)
        rows.append((name, t_nb, t_np))
    return rows


def bench_step(shape, lz, steps):
    spec = GridSpec(*shape, 1.0, 1.0, lz)
    bc = BoundarySpec(y_hi="moving_lid", z_lo="periodic", z_hi="periodic",
                      u_boundary=1.0)
    dom = make_domain(spec, bc)
    sub = whole_grid_subdomain(spec, bc)
    comm = SerialComm()
    ps = PropagatorSpec(dt=0.001, params=FluidParams(re=1000.0))
    state = new_state(spec)
    for _ in range(3):
        projection_step(state, ps, dom, sub, comm)
    t0 = time.perf_counter()
    for _ in range(steps):
        projection_step(state, ps, dom, sub, comm)
    return (time.perf_counter() - t0) / steps


def main(steps=10):
    from stns import kernels

    kernels.warmup()
    print(f"active backend for end-to-end rows: {kernels.BACKEND}\n")
    for shape in ((32, 32, 5), (32, 32, 32)):
        print(f"--- kernels on {shape[0]}x{shape[1]}x{shape[2]} ---")
        print(f"{'kernel':<14} {'numba':>10} {'numpy':>10} {'speedup':>8}")
        for name, t_nb, t_np in bench_kernels(shape, repeat=50):
            print(f"{name:<14} {t_nb * 1e6:>8.1f}us {t_np * 1e6:>8.1f}us "
                  f"{t_np / t_nb:>7.1f}x")
        print()
    print("--- full projection step (active backend) ---")
    for shape, lz in (((32, 32, 5), 0.1), ((32, 32, 32), 1.0)):
        t = bench_step(shape, lz, steps)
        print(f"{shape[0]}x{shape[1]}x{shape[2]}: {t * 1e3:.1f} ms/step")
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=10)
    raise SystemExit(main(steps=ap.parse_args().steps))
