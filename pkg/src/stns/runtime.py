"""Worker topology and the process-parallel space-time engine.

Workers form an N_p_time x N_p_space grid: worker id = t * N_p_space + s
(space-major).  Spatial groups (all s at fixed t) run as threads inside one
OS process per time rank; time groups (fixed s across t) communicate over
unidirectional pipes between adjacent time ranks, so no message ever
crosses both a space and a time boundary in one hop.

Per time rank and Parareal iteration the schedule is: evaluate F over the
owned block of coarse intervals (overlapping the upstream correction
sweep), then receive the new block-start state from the left, run the
serial-in-n correction sweep, and forward the block-end state to the
right.  The last rank streams each iteration's final-time state to the
coordinator, which does defect bookkeeping against the reference; per-rank
phase timings arrive at shutdown.

Arithmetic is identical to ``parareal.parareal_run`` (bitwise), only the
scheduling differs.
"""

from __future__ import annotations

import multiprocessing as mp
import queue
import threading
import time
import traceback
from dataclasses import dataclass

from . import kernels
from .decomposition import (
    ProcessLayout,
    SerialComm,
    ThreadGroup,
    gather_full_state,
    make_domains,
    scatter_full_state,
    select_decomposition,
)
from .mesh import FlowState, GridSpec, make_domain
from .parareal import (
    DefectReport,
    IterationRow,
    PararealConfig,
    max_defect,
)
from .snapshots import pack_state, unpack_state
from .stepper import PropagatorSpec, propagate


@dataclass(frozen=True)
class WorkerCoord:
    space_rank: int
    time_rank: int


@dataclass(frozen=True)
class CommGroup:
    kind: str  # "SPATIAL" | "TIME"
    members: tuple
    rank: int


def worker_id(coord: WorkerCoord, n_space: int) -> int:
    return coord.time_rank * n_space + coord.space_rank


def build_topology(n_space: int, n_time: int):
    """Per-worker (coord, spatial group, time group); pure in its arguments."""
    if n_space < 1 or n_time < 1:
        raise ValueError("worker counts must be >= 1")
    out = []
    for t in range(n_time):
        for s in range(n_space):
            coord = WorkerCoord(s, t)
            spatial = CommGroup(
                "SPATIAL",
                tuple(t * n_space + s2 for s2 in range(n_space)),
                s,
            )
            tgroup = CommGroup(
                "TIME",
                tuple(t2 * n_space + s for t2 in range(n_time)),
                t,
            )
            out.append((coord, spatial, tgroup))
    return out


def send_state(conn, payload: dict):
    """Send one packed subdomain state (or list of them) over a channel."""
    conn.send(payload)


def recv_state(conn, like: dict | None = None):
    """Receive a packed state; optionally validate shapes against ``like``."""
    payload = conn.recv()
    if like is not None:
        if set(payload) != set(like):
            raise ValueError(
                f"state message keys {sorted(payload)} != {sorted(like)}"
            )
        for key, ref in like.items():
            if hasattr(ref, "shape") and payload[key].shape != ref.shape:
                raise ValueError(
                    f"state component {key}: shape {payload[key].shape} "
                    f"!= expected {ref.shape}"
                )
    return payload


# --------------------------------------------------------------------------
# the space-time engine


@dataclass
class EngineResult:
    final: FlowState
    report: DefectReport
    timings: list  # (time_rank, phase, seconds)
    wall: float


class _Outbox:
    """Serializes sends onto pipes so a slow reader never stalls the pipeline."""

    def __init__(self):
        self.q = queue.Queue()
        self.thread = threading.Thread(target=self._run, daemon=True)
        self.thread.start()

    def _run(self):
        while True:
            item = self.q.get()
            if item is None:
                return
            conn, payload = item
            conn.send(payload)

    def post(self, conn, payload):
        self.q.put((conn, payload))

    def close(self):
        self.q.put(None)
        self.thread.join()


def _spmd_propagate(locals_packed, t0, t1, ps, domains, subs, group, nlocs):
    """Propagate every spatial rank of one slice concurrently; returns packed."""
    n_space = len(domains)
    if n_space == 1:
        state = unpack_state(locals_packed[0], nlocs[0])
        out = propagate(state, t0, t1, ps, domains[0], subs[0], SerialComm())
        return [pack_state(out, nlocs[0])]
    results = [None] * n_space
    errors = [None] * n_space

    def run(s):
        try:
            state = unpack_state(locals_packed[s], nlocs[s])
            out = propagate(state, t0, t1, ps, domains[s], subs[s], group.comm(s))
            results[s] = pack_state(out, nlocs[s])
        except BaseException as exc:  # noqa: BLE001
            errors[s] = exc
            group.barrier.abort()

    threads = [threading.Thread(target=run, args=(s,)) for s in range(n_space)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    real = [e for e in errors if e is not None
            and not isinstance(e, threading.BrokenBarrierError)]
    if real:
        raise real[0]
    if any(errors):
        raise next(e for e in errors if e is not None)
    return results


def _combine_packed(f, g_new, g_old, t):
    out = []
    for fs, gn, go in zip(f, g_new, g_old):
        out.append(
            {
                "u": fs["u"] + (gn["u"] - go["u"]),
                "v": fs["v"] + (gn["v"] - go["v"]),
                "w": fs["w"] + (gn["w"] - go["w"]),
                "p": fs["p"] + (gn["p"] - go["p"]),
                "t": t,
            }
        )
    return out


def _time_worker(time_rank, cfg, block, initial_packed, ps_fine, ps_coarse,
                 spec, bc, flags, layout_dims, left, right, coord_conn):
    """One time rank: owns coarse intervals [block[0], block[1])."""
    try:
        layout = ProcessLayout(*layout_dims)
        domains, subs = make_domains(spec, bc, flags, layout)
        nlocs = [d.nloc for d in domains]
        group = ThreadGroup(spec.shape, subs) if layout.size > 1 else None
        outbox = _Outbox()

        n0, n1 = block
        y = [None] * (n1 - n0)
        g_prev = [None] * (n1 - n0)
        timings = []

        def sweep(k):
            t_coarse = t_update = t_wait = 0.0
            tic = time.perf_counter()
            if time_rank == 0:
                cur = initial_packed
            else:
                cur = left.recv()
            t_wait += time.perf_counter() - tic
            for idx, n in enumerate(range(n0, n1)):
                t0s, t1s = cfg.slice_time(n), cfg.slice_time(n + 1)
                if k == 0:
                    y[idx] = cur
                    tic = time.perf_counter()
                    g = _spmd_propagate(cur, t0s, t1s, ps_coarse,
                                        domains, subs, group, nlocs)
                    t_coarse += time.perf_counter() - tic
                    g_prev[idx] = g
                    cur = g
                else:
                    f_idx = f_vals[idx]
                    y[idx] = cur
                    tic = time.perf_counter()
                    g_new = _spmd_propagate(cur, t0s, t1s, ps_coarse,
                                            domains, subs, group, nlocs)
                    t_coarse += time.perf_counter() - tic
                    tic = time.perf_counter()
                    cur = _combine_packed(f_idx, g_new, g_prev[idx], t1s)
                    g_prev[idx] = g_new
                    t_update += time.perf_counter() - tic
            if right is not None:
                outbox.post(right, cur)
            else:
                outbox.post(coord_conn, ("final", k, cur))
            timings.append((k, "coarse", t_coarse))
            timings.append((k, "update", t_update))
            timings.append((k, "wait", t_wait))
            return cur

        f_vals = [None] * (n1 - n0)
        sweep(0)
        for k in range(1, cfg.n_iterations + 1):
            tic = time.perf_counter()
            for idx, n in enumerate(range(n0, n1)):
                f_vals[idx] = _spmd_propagate(
                    y[idx], cfg.slice_time(n), cfg.slice_time(n + 1),
                    ps_fine, domains, subs, group, nlocs,
                )
            timings.append((k, "fine", time.perf_counter() - tic))
            sweep(k)
        outbox.post(coord_conn, ("timings", time_rank, timings))
        outbox.close()
    except BaseException:  # noqa: BLE001 - ship the traceback to the coordinator
        coord_conn.send(("error", time_rank, traceback.format_exc()))
        raise


def run_parareal_engine(cfg: PararealConfig, initial: FlowState,
                        ps_fine: PropagatorSpec, ps_coarse: PropagatorSpec,
                        spec: GridSpec, bc, flags, n_space: int = 1,
                        reference: FlowState | None = None) -> EngineResult:
    """Space-time parallel Parareal: N_p_time processes x N_p_space threads.

    Returns the final-time state assembled on the coordinator, the defect
    report (vs ``reference`` when given), and per-rank phase timings.
    """
    kernels.warmup()
    layout = select_decomposition(n_space, *spec.shape)
    domains, subs = make_domains(spec, bc, flags, layout)
    nlocs = [d.nloc for d in domains]
    initial_packed = [
        pack_state(loc, nloc)
        for loc, nloc in zip(scatter_full_state(initial, subs, spec), nlocs)
    ]

    full_domain = make_domain(spec, bc, flags)
    blocks = cfg.blocks()
    ctx = mp.get_context("fork")

    chain = [ctx.Pipe(duplex=False) for _ in range(cfg.n_time - 1)]
    coord_pipes = [ctx.Pipe(duplex=False) for _ in range(cfg.n_time)]
    workers = []
    t_begin = time.perf_counter()
    for t in range(cfg.n_time):
        left = chain[t - 1][0] if t > 0 else None
        right = chain[t][1] if t < cfg.n_time - 1 else None
        proc = ctx.Process(
            target=_time_worker,
            args=(t, cfg, blocks[t], initial_packed, ps_fine, ps_coarse,
                  spec, bc, flags, layout.dims, left, right,
                  coord_pipes[t][1]),
            name=f"time-{t}",
        )
        proc.start()
        workers.append(proc)

    report = DefectReport()
    finals = {}
    timings_by_rank = {}
    read_conns = [coord_pipes[t][0] for t in range(cfg.n_time)]
    try:
        while len(finals) < cfg.n_iterations + 1 or len(timings_by_rank) < cfg.n_time:
            ready = mp.connection.wait(read_conns, timeout=600.0)
            if not ready:
                raise RuntimeError("parareal workers made no progress for 600 s")
            for conn in ready:
                msg = conn.recv()
                if msg[0] == "error":
                    raise RuntimeError(f"time rank {msg[1]} failed:\n{msg[2]}")
                if msg[0] == "final":
                    finals[msg[1]] = msg[2]
                elif msg[0] == "timings":
                    timings_by_rank[msg[1]] = msg[2]
    finally:
        for proc in workers:
            proc.join(timeout=60)
            if proc.is_alive():
                proc.terminate()
    wall = time.perf_counter() - t_begin

    # defect rows from the streamed finals, phase walls as max over ranks
    final_state = None
    for k in range(cfg.n_iterations + 1):
        locals_k = [unpack_state(pk, nloc) for pk, nloc in zip(finals[k], nlocs)]
        full = gather_full_state(locals_k, subs, spec)
        full.t = cfg.t_end
        if reference is not None:
            d = max_defect(full, reference, full_domain)
        else:
            d = (float("nan"),) * 4
        phase = {"fine": 0.0, "coarse": 0.0, "update": 0.0}
        for rank_rows in timings_by_rank.values():
            acc = {"fine": 0.0, "coarse": 0.0, "update": 0.0}
            for kk, name, secs in rank_rows:
                if kk == k and name in acc:
                    acc[name] += secs
            for name in phase:
                phase[name] = max(phase[name], acc[name])
        report.rows.append(
            IterationRow(k, *d, phase["fine"], phase["coarse"], phase["update"])
        )
        final_state = full

    flat = []
    for rank, rows in sorted(timings_by_rank.items()):
        totals = {}
        for _, name, secs in rows:
            totals[name] = totals.get(name, 0.0) + secs
        for name, secs in sorted(totals.items()):
            flat.append((rank, name, secs))
    return EngineResult(final=final_state, report=report, timings=flat, wall=wall)
