"""Spatial decomposition: factorization, cost model, partition, halos, reductions.

The worker count P is factorized into (Px, Py, Pz); the communication cost

    C(Px, Py, Pz) = (I/Px)(J/Py) + (J/Py)(K/Pz) + (I/Px)(K/Pz)

(surface area between neighboring subdomains, real division) selects the
decomposition.  Ties prefer larger Px, then larger Py.

Halo exchange runs axis by axis (x, then y, then z) with full transverse
extents, so edge and corner ghosts fill transitively without diagonal
messages; wall boundary conditions are applied afterwards and override
exchanged data.  Global sums used inside the solver combine per-rank
error-free expansions in ascending rank order and round once, which makes
them bitwise independent of the decomposition.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from . import kernels
from .mesh import FlowState, GridSpec, fill_all_walls, make_domain

MIN_LOCAL_EXTENT = 3


@dataclass(frozen=True)
class ProcessLayout:
    px: int
    py: int
    pz: int

    def __post_init__(self):
        if min(self.px, self.py, self.pz) < 1:
            raise ValueError("worker counts per axis must be >= 1")

    @property
    def size(self):
        return self.px * self.py * self.pz

    @property
    def dims(self):
        return (self.px, self.py, self.pz)


@dataclass(frozen=True)
class Subdomain:
    """Owned cell ranges of one spatial rank plus its neighbor table."""

    rank: int
    coords: tuple
    lo: tuple
    hi: tuple
    neighbors: tuple  # ((lo_rank|None, hi_rank|None) per axis)


def factorizations(p: int):
    """All ordered triples (px, py, pz) of positive integers with product p."""
    if p < 1:
        raise ValueError("worker count must be >= 1")
    out = []
    for px in range(1, p + 1):
        if p % px:
            continue
        rest = p // px
        for py in range(1, rest + 1):
            if rest % py:
                continue
            out.append((px, py, rest // py))
    return out


def comm_cost(px, py, pz, ni, nj, nk) -> float:
    if min(px, py, pz, ni, nj, nk) < 1:
        raise ValueError("comm_cost arguments must be >= 1")
    return (ni / px) * (nj / py) + (nj / py) * (nk / pz) + (ni / px) * (nk / pz)


def _feasible(triple, shape):
    return all(n // p >= MIN_LOCAL_EXTENT for p, n in zip(triple, shape))


def select_decomposition(p, ni, nj, nk) -> ProcessLayout:
    """Cost-minimal feasible factorization; ties break to larger px, then py."""
    shape = (ni, nj, nk)
    best = None
    best_key = None
    for triple in factorizations(p):
        if not _feasible(triple, shape):
            continue
        key = (comm_cost(*triple, ni, nj, nk), -triple[0], -triple[1])
        if best_key is None or key < best_key:
            best, best_key = triple, key
    if best is None:
        raise ValueError(
            f"no factorization of {p} workers keeps every local extent >= "
            f"{MIN_LOCAL_EXTENT} on a {ni}x{nj}x{nk} grid"
        )
    return ProcessLayout(*best)


def _axis_splits(n, p):
    base, rem = divmod(n, p)
    sizes = [base + 1 if r < rem else base for r in range(p)]
    starts = np.cumsum([0] + sizes)
    return [(int(starts[i]), int(starts[i + 1])) for i in range(p)]


def partition(spec: GridSpec, layout: ProcessLayout, bc) -> list:
    """Tile the grid into layout.size subdomains (row-major x, y, z rank order)."""
    splits = [_axis_splits(n, p) for n, p in zip(spec.shape, layout.dims)]
    for axis, ranges in enumerate(splits):
        for lo, hi in ranges:
            if hi - lo < MIN_LOCAL_EXTENT:
                raise ValueError(
                    f"axis {axis}: local extent {hi - lo} below the stencil "
                    f"minimum {MIN_LOCAL_EXTENT}"
                )
    px, py, pz = layout.dims
    subs = []
    for ix in range(px):
        for iy in range(py):
            for iz in range(pz):
                rank = (ix * py + iy) * pz + iz
                coords = (ix, iy, iz)
                lo = tuple(splits[a][coords[a]][0] for a in range(3))
                hi = tuple(splits[a][coords[a]][1] for a in range(3))
                neighbors = []
                for axis, p_axis in enumerate(layout.dims):
                    pair = []
                    for step in (-1, 1):
                        c = coords[axis] + step
                        if 0 <= c < p_axis:
                            pass
                        elif bc.periodic(axis):
                            c %= p_axis
                        else:
                            pair.append(None)
                            continue
                        nb = list(coords)
                        nb[axis] = c
                        pair.append((nb[0] * py + nb[1]) * pz + nb[2])
                    neighbors.append(tuple(pair))
                subs.append(
                    Subdomain(rank, coords, lo, hi, tuple(neighbors))
                )
    return subs


def make_domains(spec, bc, flags, layout: ProcessLayout):
    subs = partition(spec, layout, bc)
    return [make_domain(spec, bc, flags, sub.lo, sub.hi) for sub in subs], subs


# --------------------------------------------------------------------------
# ghost slabs


def _ghost_slabs(arr_axis_len, width):
    """((ghost_lo, src_for_lo), (ghost_hi, src_for_hi)) index ranges.

    ``src`` ranges are in the *neighbor's* local indexing; by construction the
    padded layout is identical on every rank, so the source of my lo ghost is
    the neighbor's high interior band and vice versa.
    """
    n = arr_axis_len - 2 * width
    lo_ghost = slice(0, width)
    hi_src = slice(n, n + width)
    hi_ghost = slice(n + width, n + 2 * width)
    lo_src = slice(width, 2 * width)
    return (lo_ghost, hi_src), (hi_ghost, lo_src)


def _take_axis(arr, axis, sl):
    idx = [slice(None)] * 3
    idx[axis] = sl
    return arr[tuple(idx)]


def velocity_boundary_band(state: FlowState, axis: int, side: int):
    """Interior band a neighbor on ``side`` needs to fill its ghosts (width 2)."""
    bands = []
    for f in (state.u, state.v, state.w):
        (_, hi_src), (_, lo_src) = _ghost_slabs(f.shape[axis], 2)
        src = hi_src if side == 1 else lo_src
        bands.append(_take_axis(f, axis, src).copy())
    return bands


def pressure_boundary_band(state: FlowState, axis: int, side: int):
    (_, hi_src), (_, lo_src) = _ghost_slabs(state.p.shape[axis], 1)
    src = hi_src if side == 1 else lo_src
    return _take_axis(state.p, axis, src).copy()


def set_velocity_ghosts(state: FlowState, axis: int, side: int, bands):
    for f, band in zip((state.u, state.v, state.w), bands):
        (lo_ghost, _), (hi_ghost, _) = _ghost_slabs(f.shape[axis], 2)
        ghost = lo_ghost if side == 0 else hi_ghost
        _take_axis(f, axis, ghost)[...] = band


def set_pressure_ghosts(state: FlowState, axis: int, side: int, band):
    (lo_ghost, _), (hi_ghost, _) = _ghost_slabs(state.p.shape[axis], 1)
    ghost = lo_ghost if side == 0 else hi_ghost
    _take_axis(state.p, axis, ghost)[...] = band


# --------------------------------------------------------------------------
# spatial communicators


class SerialComm:
    """Single-subdomain communicator: wraps are self-exchanges, reduces no-ops.

    Reductions run over the canonical cell layout, so they agree bitwise
    with any thread decomposition of the same grid.
    """

    rank = 0
    size = 1

    def __init__(self):
        self._scratch = None

    def exchange_axis(self, state, domain, sub, axis, which):
        nb_lo, nb_hi = sub.neighbors[axis]
        if nb_lo is None and nb_hi is None:
            return
        # the only possible neighbor of a single rank is itself (periodic wrap)
        if which in ("velocity", "both"):
            if nb_lo is not None:
                set_velocity_ghosts(
                    state, axis, 0, velocity_boundary_band(state, axis, 1)
                )
            if nb_hi is not None:
                set_velocity_ghosts(
                    state, axis, 1, velocity_boundary_band(state, axis, 0)
                )
        if which in ("pressure", "both"):
            if nb_lo is not None:
                set_pressure_ghosts(
                    state, axis, 0, pressure_boundary_band(state, axis, 1)
                )
            if nb_hi is not None:
                set_pressure_ghosts(
                    state, axis, 1, pressure_boundary_band(state, axis, 0)
                )

    def refresh_pressure(self, p, domain, sub):
        wraps = tuple(nb[0] is not None for nb in sub.neighbors)
        kernels.refresh_p_ghosts(p, *wraps)

    def _buf(self, shape):
        if self._scratch is None or self._scratch.shape != shape:
            self._scratch = np.empty(shape)
        return self._scratch

    def dot(self, a, b) -> float:
        av = a[1:-1, 1:-1, 1:-1]
        buf = self._buf(av.shape)
        np.multiply(av, b[1:-1, 1:-1, 1:-1], out=buf)
        return float(kernels.pairwise_sum(buf.ravel()))

    def sum_field(self, a) -> float:
        av = a[1:-1, 1:-1, 1:-1]
        buf = self._buf(av.shape)
        buf[...] = av
        return float(kernels.pairwise_sum(buf.ravel()))

    def allreduce_max(self, value) -> float:
        return value

    def barrier(self):
        pass


class ThreadGroup:
    """Shared rendezvous state for one spatial group of threads."""

    def __init__(self, global_shape, subs):
        self.size = len(subs)
        self.subs = subs
        self.barrier = threading.Barrier(self.size)
        self.slots = [None] * self.size
        self.scalar = 0.0
        self.buffer = np.empty(tuple(global_shape))
        self._flat = self.buffer.ravel()

    def comm(self, rank):
        return ThreadComm(self, rank)


class ThreadComm:
    """Spatial communicator backed by threads sharing one address space.

    Every collective is barrier-fenced: post, then read.  Ghost fills write
    only the caller's own arrays and read neighbor interiors, which no phase
    mutates concurrently.  Reductions assemble elementwise contributions
    into one buffer in the canonical global cell layout and reduce it with
    a fixed pairwise tree, which makes them bitwise independent of the
    decomposition.
    """

    def __init__(self, group: ThreadGroup, rank: int):
        self.group = group
        self.rank = rank
        self.size = group.size
        self.sub = group.subs[rank]

    def barrier(self):
        self.group.barrier.wait()

    def exchange_axis(self, state, domain, sub, axis, which):
        slots = self.group.slots
        slots[self.rank] = state
        self.barrier()
        nb_lo, nb_hi = sub.neighbors[axis]
        if which in ("velocity", "both"):
            if nb_lo is not None:
                set_velocity_ghosts(
                    state, axis, 0, velocity_boundary_band(slots[nb_lo], axis, 1)
                )
            if nb_hi is not None:
                set_velocity_ghosts(
                    state, axis, 1, velocity_boundary_band(slots[nb_hi], axis, 0)
                )
        if which in ("pressure", "both"):
            if nb_lo is not None:
                set_pressure_ghosts(
                    state, axis, 0, pressure_boundary_band(slots[nb_lo], axis, 1)
                )
            if nb_hi is not None:
                set_pressure_ghosts(
                    state, axis, 1, pressure_boundary_band(slots[nb_hi], axis, 0)
                )
        self.barrier()

    def refresh_pressure(self, p, domain, sub):
        carrier = FlowState(
            u=_EMPTY, v=_EMPTY, w=_EMPTY, p=p
        )
        for axis in range(3):
            self.exchange_axis(carrier, domain, sub, axis, "pressure")
        fill_all_walls(carrier, domain, "pressure")

    def _slab(self):
        return tuple(slice(l, h) for l, h in zip(self.sub.lo, self.sub.hi))

    def _reduce_buffer(self) -> float:
        self.barrier()
        if self.rank == 0:
            self.group.scalar = float(kernels.pairwise_sum(self.group._flat))
        self.barrier()
        result = self.group.scalar
        self.barrier()
        return result

    def dot(self, a, b) -> float:
        np.multiply(
            a[1:-1, 1:-1, 1:-1], b[1:-1, 1:-1, 1:-1],
            out=self.group.buffer[self._slab()],
        )
        return self._reduce_buffer()

    def sum_field(self, a) -> float:
        self.group.buffer[self._slab()] = a[1:-1, 1:-1, 1:-1]
        return self._reduce_buffer()

    def allreduce_max(self, value) -> float:
        slots = self.group.slots
        slots[self.rank] = value
        self.barrier()
        result = max(slots[r] for r in range(self.size))
        self.barrier()
        return result


_EMPTY = np.zeros((1, 1, 1))


def refresh_ghosts(state, domain, sub, comm, which="both"):
    """Exchange halos axis by axis, then apply wall conditions (spec order)."""
    for axis in range(3):
        comm.exchange_axis(state, domain, sub, axis, which)
    fill_all_walls(state, domain, which)


def whole_grid_subdomain(spec: GridSpec, bc) -> Subdomain:
    neighbors = tuple(
        (0, 0) if bc.periodic(axis) else (None, None) for axis in range(3)
    )
    return Subdomain(0, (0, 0, 0), (0, 0, 0), spec.shape, neighbors)


# --------------------------------------------------------------------------
# reductions and gather/scatter


def global_reduce(partials, op: str):
    """Combine one scalar per rank: SUM in ascending rank order, or MAX."""
    vals = list(partials)
    if not vals:
        raise ValueError("global_reduce needs one contribution per rank")
    if op == "SUM":
        acc = vals[0]
        for v in vals[1:]:
            acc = acc + v
        return acc
    if op == "MAX":
        return max(vals)
    raise ValueError(f"unknown reduction {op!r}")


def gather_full_state(locals_, subs, spec: GridSpec) -> FlowState:
    """Assemble per-rank local states into one whole-grid state (interiors)."""
    from .mesh import new_state

    out = new_state(spec)
    out.t = locals_[0].t
    for state, sub in zip(locals_, subs):
        lo, hi = sub.lo, sub.hi
        n = tuple(h - l for l, h in zip(lo, hi))
        for comp, (gf, lf) in enumerate(
            zip((out.u, out.v, out.w), (state.u, state.v, state.w))
        ):
            src = [slice(2, 2 + n[a]) for a in range(3)]
            dst = [slice(lo[a] + 2, lo[a] + 2 + n[a]) for a in range(3)]
            if lo[comp] == 0:
                # include the low wall/seam face owned by the first rank
                src[comp] = slice(1, 2 + n[comp])
                dst[comp] = slice(1, 2 + n[comp])
            gf[tuple(dst)] = lf[tuple(src)]
        src = tuple(slice(1, 1 + n[a]) for a in range(3))
        dst = tuple(slice(lo[a] + 1, lo[a] + 1 + n[a]) for a in range(3))
        out.p[dst] = state.p[src]
    return out


def scatter_full_state(full: FlowState, subs, spec: GridSpec) -> list:
    """Slice a whole-grid state into per-rank local states (with ghost overlap)."""
    from .mesh import new_local_state

    out = []
    for sub in subs:
        lo, hi = sub.lo, sub.hi
        n = tuple(h - l for l, h in zip(lo, hi))
        loc = new_local_state(n)
        loc.t = full.t
        for gf, lf in zip(
            (full.u, full.v, full.w), (loc.u, loc.v, loc.w)
        ):
            src = tuple(slice(lo[a], lo[a] + n[a] + 4) for a in range(3))
            lf[...] = gf[src]
        src = tuple(slice(lo[a], lo[a] + n[a] + 2) for a in range(3))
        loc.p[...] = full.p[src]
        out.append(loc)
    return out


# --------------------------------------------------------------------------
# SPMD execution of one spatial group


def run_spmd(fn, subs, global_shape):
    """Run fn(rank, comm) on one thread per subdomain; returns the results.

    Exceptions propagate: the first failing rank's error is re-raised after
    all threads stop (the barrier is aborted so peers unblock).
    """
    n_ranks = len(subs)
    if n_ranks == 1:
        return [fn(0, SerialComm())]
    group = ThreadGroup(global_shape, subs)
    results = [None] * n_ranks
    errors = [None] * n_ranks

    def target(rank):
        try:
            results[rank] = fn(rank, group.comm(rank))
        except BaseException as exc:  # noqa: BLE001 - must unblock the group
            errors[rank] = exc
            group.barrier.abort()

    threads = [
        threading.Thread(target=target, args=(r,), name=f"space-{r}")
        for r in range(n_ranks)
    ]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    real = [e for e in errors if e is not None and not isinstance(e, threading.BrokenBarrierError)]
    if real:
        raise real[0]
    for err in errors:
        if err is not None:
            raise err
    return results
