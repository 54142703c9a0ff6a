"""Parareal over coarse intervals: config, defect bookkeeping, serial driver.

The update per coarse interval [t_n, t_n+1] is

    y^{k+1}_{n+1} = F(y^k_n) + ( G(y^{k+1}_n) - G(y^k_n) )

computed in exactly that grouping: when y^{k+1}_n equals y^k_n bitwise the
correction vanishes exactly, which yields bitwise slice exactness (y^k_n is
the fine solution for n <= k) and a bitwise-zero defect when G and F
coincide.  Iteration 0 is the plain coarse sweep.

``parareal_run`` here is the sequential reference implementation; the
process-parallel engine in ``runtime`` reproduces it bitwise.  States are
stored ghost-free between uses to bound memory (two stored states per
coarse interval).
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .decomposition import SerialComm, whole_grid_subdomain
from .mesh import Domain, FlowState, face_valid_mask
from .pressure import remove_mean
from .snapshots import pack_state, unpack_state
from .stepper import PropagatorSpec, propagate

CSV_COLUMNS = (
    "iteration",
    "defect_u",
    "defect_v",
    "defect_w",
    "defect_p",
    "t_wall_fine",
    "t_wall_coarse",
    "t_wall_update",
)


@dataclass(frozen=True)
class PararealConfig:
    t_end: float
    dt_coarse: float
    dt_fine: float
    n_iterations: int
    n_time: int = 1

    def __post_init__(self):
        if self.t_end <= 0 or self.dt_coarse <= 0 or self.dt_fine <= 0:
            raise ValueError("t_end and step sizes must be positive")
        if self.n_iterations < 0:
            raise ValueError("iteration count must be >= 0")
        if self.n_time < 1:
            raise ValueError("need at least one time worker")
        _require_multiple(self.t_end, self.dt_coarse, "T", "coarse dt")
        _require_multiple(self.dt_coarse, self.dt_fine, "coarse dt", "fine dt")
        if self.n_time > self.n_coarse:
            raise ValueError(
                f"{self.n_time} time workers exceed {self.n_coarse} coarse intervals"
            )

    @property
    def n_coarse(self) -> int:
        return int(round(self.t_end / self.dt_coarse))

    @property
    def n_ratio(self) -> int:
        return int(round(self.dt_coarse / self.dt_fine))

    @property
    def n_fine(self) -> int:
        return self.n_coarse * self.n_ratio

    def slice_time(self, n: int) -> float:
        return n * self.dt_coarse

    def blocks(self):
        """Contiguous interval blocks per time rank (first ranks get the extra)."""
        base, rem = divmod(self.n_coarse, self.n_time)
        out = []
        start = 0
        for r in range(self.n_time):
            size = base + 1 if r < rem else base
            out.append((start, start + size))
            start += size
        return out


def _require_multiple(total, step, total_name, step_name):
    n = round(total / step)
    if n < 1 or not math.isclose(n * step, total, rel_tol=1e-12, abs_tol=0.0):
        raise ValueError(
            f"{total_name}={total} is not an integer multiple of {step_name}={step}"
        )


@dataclass
class IterationRow:
    iteration: int
    defect_u: float
    defect_v: float
    defect_w: float
    defect_p: float
    t_wall_fine: float
    t_wall_coarse: float
    t_wall_update: float

    def defects(self):
        return (self.defect_u, self.defect_v, self.defect_w, self.defect_p)


@dataclass
class DefectReport:
    rows: list = field(default_factory=list)

    def defect_max(self, iteration: int) -> float:
        return max(self.rows[iteration].defects())

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in self.rows:
                writer.writerow(
                    [row.iteration]
                    + [f"{v:.17g}" for v in row.defects()]
                    + [
                        f"{row.t_wall_fine:.6f}",
                        f"{row.t_wall_coarse:.6f}",
                        f"{row.t_wall_update:.6f}",
                    ]
                )

    @classmethod
    def read_csv(cls, path):
        report = cls()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != list(CSV_COLUMNS):
                raise ValueError(
                    f"{path}: unexpected columns {reader.fieldnames}"
                )
            for rec in reader:
                report.rows.append(
                    IterationRow(
                        iteration=int(rec["iteration"]),
                        **{k: float(rec[k]) for k in CSV_COLUMNS[1:]},
                    )
                )
        return report


def theoretical_speedup_bound(n_p_time: int, n_it: int) -> float:
    """Parareal speedup bound N_p_time / N_it."""
    if n_it < 1:
        raise ValueError("the bound needs at least one iteration")
    return n_p_time / n_it


def max_defect(a: FlowState, b: FlowState, domain: Domain, comm=None):
    """Per-component max-norm difference over fluid faces/cells.

    Pressure means are removed from copies of both states before comparing,
    so the nullspace constant never pollutes the defect.
    """
    comm = comm or SerialComm()
    for fa, fb in zip(a.components(), b.components()):
        if fa.shape != fb.shape:
            raise ValueError(f"shape mismatch {fa.shape} vs {fb.shape}")
    core = tuple(slice(2, 2 + s) for s in domain.nloc)
    out = []
    for comp in range(3):
        fa, fb = a.components()[comp], b.components()[comp]
        valid = face_valid_mask(domain, comp)[core]
        diff = np.abs(fa[core] - fb[core])[valid != 0]
        local = float(diff.max()) if diff.size else 0.0
        out.append(comm.allreduce_max(local))
    pa = a.p.copy()
    pb = b.p.copy()
    remove_mean(pa, domain, comm)
    remove_mean(pb, domain, comm)
    pcore = tuple(slice(1, 1 + s) for s in domain.nloc)
    cmask = tuple(slice(2, 2 + s) for s in domain.nloc)
    dp = np.abs(pa[pcore] - pb[pcore])[domain.mask[cmask] != 0]
    local = float(dp.max()) if dp.size else 0.0
    out.append(comm.allreduce_max(local))
    return tuple(out)


def combine_states(f: FlowState, g_new: FlowState, g_old: FlowState,
                   t: float) -> FlowState:
    """Parareal correction F + (G_new - G_old) with the exact grouping."""
    out = FlowState(
        u=f.u + (g_new.u - g_old.u),
        v=f.v + (g_new.v - g_old.v),
        w=f.w + (g_new.w - g_old.w),
        p=f.p + (g_new.p - g_old.p),
        t=t,
    )
    return out


def parareal_run(cfg: PararealConfig, initial: FlowState,
                 ps_fine: PropagatorSpec, ps_coarse: PropagatorSpec,
                 domain: Domain, reference: FlowState | None = None,
                 on_iteration=None, slice_hook=None):
    """Sequential Parareal over the whole grid (single spatial rank).

    ``reference`` is the serial fine solution at T used for the defect rows
    (rows carry NaN defects when absent).  ``on_iteration(k, state)`` is an
    optional hook receiving each iterate's final-time state;
    ``slice_hook(k, n, state)`` additionally sees every iterate y^k_n as the
    correction sweep produces it (per-slice inspection, off by default).
    """
    if ps_coarse.dt != cfg.dt_coarse or ps_fine.dt != cfg.dt_fine:
        raise ValueError("propagator step sizes disagree with the config")
    sub = whole_grid_subdomain(domain.spec, domain.bc)
    comm = SerialComm()
    nloc = domain.nloc
    n = cfg.n_coarse

    y = [None] * n       # packed iterate at each interval start
    g_prev = [None] * n  # packed coarse result of the previous iterate
    report = DefectReport()

    def record(k, final, t_fine, t_coarse, t_update):
        if reference is not None:
            d = max_defect(final, reference, domain, comm)
        else:
            d = (math.nan,) * 4
        report.rows.append(IterationRow(k, *d, t_fine, t_coarse, t_update))
        if on_iteration is not None:
            on_iteration(k, final)

    # iteration 0: serial coarse sweep
    cur = initial.copy()
    t_coarse = 0.0
    for i in range(n):
        y[i] = pack_state(cur, nloc)
        tic = time.perf_counter()
        g = propagate(cur, cfg.slice_time(i), cfg.slice_time(i + 1),
                      ps_coarse, domain, sub, comm)
        t_coarse += time.perf_counter() - tic
        g_prev[i] = pack_state(g, nloc)
        cur = g
        if slice_hook is not None:
            slice_hook(0, i + 1, cur)
    final = cur
    record(0, final, 0.0, t_coarse, 0.0)

    for k in range(1, cfg.n_iterations + 1):
        t_fine = t_coarse = t_update = 0.0
        cur = initial.copy()
        for i in range(n):
            t0, t1 = cfg.slice_time(i), cfg.slice_time(i + 1)
            tic = time.perf_counter()
            f_i = propagate(unpack_state(y[i], nloc), t0, t1,
                            ps_fine, domain, sub, comm)
            t_fine += time.perf_counter() - tic
            y[i] = pack_state(cur, nloc)
            tic = time.perf_counter()
            g_new = propagate(cur, t0, t1, ps_coarse, domain, sub, comm)
            t_coarse += time.perf_counter() - tic
            tic = time.perf_counter()
            g_old = unpack_state(g_prev[i], nloc)
            nxt = combine_states(f_i, g_new, g_old, t1)
            g_prev[i] = pack_state(g_new, nloc)
            t_update += time.perf_counter() - tic
            cur = nxt
            if slice_hook is not None:
                slice_hook(k, i + 1, cur)
        final = cur
        record(k, final, t_fine, t_coarse, t_update)

    return final, report
