"""Experiment harness: configs, presets, runs, reports.

The two shipped presets reproduce the driven-cavity simulation parameters:

* ``sim1``: quasi-2D cavity, 32 x 32 x 5 cells on [0,1] x [0,1] x [0,0.1],
  T = 80.
* ``sim2``: fully 3D cavity with 49 cube obstacles on the median plane,
  32^3 cells on the unit cube, T = 24.

Both use dt_coarse = 0.01, dt_fine = 0.001, Re = 1000, lid speed 1, periodic
in z, no-slip elsewhere.  Desk-scale runs shorten T (sim1: 8.0, sim2: 2.4)
unless the full horizon is requested.

Configs round-trip through an INI file; the serial fine reference used for
defect reports is cached as an STNS1 dump keyed by a hash of the physics
fields.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .decomposition import (
    make_domains,
    run_spmd,
    scatter_full_state,
    gather_full_state,
    select_decomposition,
)
from .discretization import FluidParams
from .mesh import (
    BoundarySpec,
    CellFlags,
    GridSpec,
    MOVING_LID,
    NOSLIP,
    PERIODIC,
    build_obstacle_flags,
    make_domain,
    new_state,
)
from .parareal import DefectReport, PararealConfig, theoretical_speedup_bound
from .runtime import EngineResult, run_parareal_engine
from .snapshots import read_binary, write_binary, write_vtk
from .stepper import PropagatorSpec, StepDiagnostics, propagate

DESK_HORIZONS = {"sim1": 8.0, "sim2": 2.4}


def cavity49_boxes(spec: GridSpec):
    """The 7x7 array of 2x2x2-cell cubes on the median plane (sim2 preset)."""
    hx, hy, hz = spec.h
    boxes = []
    z0 = 15 * hz
    z1 = 17 * hz
    for cx in range(4, 29, 4):
        for cy in range(4, 29, 4):
            boxes.append(
                ((cx - 1) * hx, (cx + 1) * hx, (cy - 1) * hy, (cy + 1) * hy, z0, z1)
            )
    return boxes


@dataclass
class SimulationConfig:
    name: str = "custom"
    nx: int = 32
    ny: int = 32
    nz: int = 5
    lx: float = 1.0
    ly: float = 1.0
    lz: float = 0.1
    re: float = 1000.0
    u_boundary: float = 1.0
    bc_x_lo: str = NOSLIP
    bc_x_hi: str = NOSLIP
    bc_y_lo: str = NOSLIP
    bc_y_hi: str = MOVING_LID
    bc_z_lo: str = PERIODIC
    bc_z_hi: str = PERIODIC
    t_end: float = 8.0
    dt_coarse: float = 0.01
    dt_fine: float = 0.001
    n_iterations: int = 2
    n_space: int = 1
    n_time: int = 1
    obstacles: str = "none"  # "none" | "cavity49" | explicit boxes
    boxes: tuple = ()
    out_dir: str = "out"
    snapshot_every: float = 0.0

    def spec(self) -> GridSpec:
        return GridSpec(self.nx, self.ny, self.nz, self.lx, self.ly, self.lz)

    def boundary(self) -> BoundarySpec:
        return BoundarySpec(
            x_lo=self.bc_x_lo, x_hi=self.bc_x_hi,
            y_lo=self.bc_y_lo, y_hi=self.bc_y_hi,
            z_lo=self.bc_z_lo, z_hi=self.bc_z_hi,
            u_boundary=self.u_boundary,
        )

    def cell_flags(self) -> CellFlags:
        spec = self.spec()
        if self.obstacles == "none" and not self.boxes:
            return CellFlags.all_fluid(spec)
        boxes = list(self.boxes)
        if self.obstacles == "cavity49":
            boxes.extend(cavity49_boxes(spec))
        elif self.obstacles != "none":
            raise ValueError(f"unknown obstacle preset {self.obstacles!r}")
        return build_obstacle_flags(spec, boxes)

    def params(self) -> FluidParams:
        return FluidParams(re=self.re)

    def parareal(self) -> PararealConfig:
        return PararealConfig(
            t_end=self.t_end,
            dt_coarse=self.dt_coarse,
            dt_fine=self.dt_fine,
            n_iterations=self.n_iterations,
            n_time=self.n_time,
        )

    def physics_hash(self) -> str:
        """Hash of everything that affects the serial fine trajectory."""
        fields = (
            self.nx, self.ny, self.nz, self.lx, self.ly, self.lz,
            self.re, self.u_boundary,
            self.bc_x_lo, self.bc_x_hi, self.bc_y_lo, self.bc_y_hi,
            self.bc_z_lo, self.bc_z_hi,
            self.t_end, self.dt_fine, self.obstacles, self.boxes,
        )
        return hashlib.sha256(repr(fields).encode()).hexdigest()[:16]


def preset(name: str, desk_scale: bool = True) -> SimulationConfig:
    """Shipped presets; ``desk_scale`` shortens T for single-host runs."""
    if name == "sim1":
        cfg = SimulationConfig(
            name="sim1", nx=32, ny=32, nz=5, lx=1.0, ly=1.0, lz=0.1,
            t_end=80.0, obstacles="none",
        )
    elif name == "sim2":
        cfg = SimulationConfig(
            name="sim2", nx=32, ny=32, nz=32, lx=1.0, ly=1.0, lz=1.0,
            t_end=24.0, obstacles="cavity49",
        )
    else:
        raise ValueError(f"unknown preset {name!r} (use sim1 or sim2)")
    if desk_scale:
        cfg = replace(cfg, t_end=DESK_HORIZONS[name])
    return cfg


# --------------------------------------------------------------------------
# config file round trip

_SECTIONS = {
    "grid": ("nx", "ny", "nz", "lx", "ly", "lz"),
    "flow": ("re", "u_boundary"),
    "boundary": ("bc_x_lo", "bc_x_hi", "bc_y_lo", "bc_y_hi", "bc_z_lo", "bc_z_hi"),
    "time": ("t_end", "dt_coarse", "dt_fine"),
    "parareal": ("n_iterations", "n_space", "n_time"),
    "obstacles": ("obstacles",),
    "output": ("out_dir", "snapshot_every"),
}

_INT_FIELDS = {"nx", "ny", "nz", "n_iterations", "n_space", "n_time"}
_FLOAT_FIELDS = {
    "lx", "ly", "lz", "re", "u_boundary", "t_end", "dt_coarse", "dt_fine",
    "snapshot_every",
}


def write_config(cfg: SimulationConfig, path_or_file):
    parser = configparser.ConfigParser()
    parser["meta"] = {"name": cfg.name}
    for section, keys in _SECTIONS.items():
        parser[section] = {}
        for key in keys:
            value = getattr(cfg, key)
            parser[section][key.replace("bc_", "")] = (
                f"{value:.17g}" if isinstance(value, float) else str(value)
            )
    if cfg.boxes:
        parser["obstacles"]["boxes"] = "; ".join(
            ",".join(f"{b:.17g}" for b in box) for box in cfg.boxes
        )
    if hasattr(path_or_file, "write"):
        parser.write(path_or_file)
    else:
        with open(path_or_file, "w") as fh:
            parser.write(fh)


def read_config(path_or_file) -> SimulationConfig:
    parser = configparser.ConfigParser()
    if hasattr(path_or_file, "read"):
        parser.read_file(path_or_file)
    else:
        with open(path_or_file) as fh:
            parser.read_file(fh)
    kwargs = {"name": parser.get("meta", "name", fallback="custom")}
    for section, keys in _SECTIONS.items():
        for key in keys:
            ini_key = key.replace("bc_", "")
            raw = parser[section][ini_key]
            if key in _INT_FIELDS:
                kwargs[key] = int(raw)
            elif key in _FLOAT_FIELDS:
                kwargs[key] = float(raw)
            else:
                kwargs[key] = raw
    if parser.has_option("obstacles", "boxes"):
        boxes = []
        for chunk in parser.get("obstacles", "boxes").split(";"):
            chunk = chunk.strip()
            if chunk:
                boxes.append(tuple(float(x) for x in chunk.split(",")))
        kwargs["boxes"] = tuple(boxes)
    return SimulationConfig(**kwargs)


def config_roundtrip(cfg: SimulationConfig) -> SimulationConfig:
    buf = io.StringIO()
    write_config(cfg, buf)
    buf.seek(0)
    return read_config(buf)


# --------------------------------------------------------------------------
# runs


@dataclass
class SerialResult:
    final: object
    wall: float
    diagnostics: StepDiagnostics
    snapshots: list = field(default_factory=list)


def run_serial(cfg: SimulationConfig, quiet: bool = False) -> SerialResult:
    """Serial fine propagation over [0, T] with optional VTK snapshots.

    With ``n_space > 1`` the grid runs decomposed on threads; the timed
    section covers only the propagation.
    """
    from . import kernels

    kernels.warmup()
    spec = cfg.spec()
    bc = cfg.boundary()
    flags = cfg.cell_flags()
    ps = PropagatorSpec(dt=cfg.dt_fine, params=cfg.params())
    full_domain = make_domain(spec, bc, flags)

    snap_times = []
    if cfg.snapshot_every > 0:
        count = int(round(cfg.t_end / cfg.snapshot_every))
        snap_times = [round(i * cfg.snapshot_every, 12) for i in range(1, count + 1)]
    os.makedirs(cfg.out_dir, exist_ok=True)

    layout = select_decomposition(cfg.n_space, *spec.shape)
    domains, subs = make_domains(spec, bc, flags, layout)
    initial = new_state(spec)
    locals_ = scatter_full_state(initial, subs, spec)
    diag = StepDiagnostics()
    snapshots = []

    checkpoints = sorted(set(snap_times + [cfg.t_end]))
    t0 = time.perf_counter()
    current = locals_
    t_prev = 0.0
    for t_next in checkpoints:
        def job(rank, comm, t_prev=t_prev, t_next=t_next, current=current):
            return propagate(
                current[rank], t_prev, t_next, ps, domains[rank], subs[rank],
                comm, diag if rank == 0 else None,
            )
        current = run_spmd(job, subs, spec.shape)
        if t_next in snap_times:
            full = gather_full_state(current, subs, spec)
            full.t = t_next
            path = os.path.join(cfg.out_dir, f"{cfg.name}_t{t_next:g}.vtk")
            write_vtk(path, full, full_domain)
            snapshots.append(path)
        t_prev = t_next
    wall = time.perf_counter() - t0

    final = gather_full_state(current, subs, spec)
    final.t = cfg.t_end
    if not quiet:
        print(
            f"serial {cfg.name}: T={cfg.t_end:g} dt={cfg.dt_fine:g} "
            f"wall={wall:.2f}s max|div|={diag.max_divergence:.2e}"
        )
    return SerialResult(final=final, wall=wall, diagnostics=diag, snapshots=snapshots)


def reference_path(cfg: SimulationConfig) -> str:
    cache = os.path.join(cfg.out_dir, "refcache")
    return os.path.join(cache, f"ref_{cfg.name}_{cfg.physics_hash()}.stns")


def serial_reference(cfg: SimulationConfig, quiet: bool = False):
    """Load-or-compute the serial fine solution at T (cached, with wall time)."""
    path = reference_path(cfg)
    meta = path + ".wall"
    if os.path.exists(path):
        state, _ = read_binary(path)
        wall = float(open(meta).read()) if os.path.exists(meta) else float("nan")
        return state, wall
    result = run_serial(replace(cfg, snapshot_every=0.0, n_space=1), quiet=quiet)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    write_binary(path, result.final, cfg.spec())
    with open(meta, "w") as fh:
        fh.write(f"{result.wall:.6f}")
    return result.final, result.wall


@dataclass
class PararealResult:
    final: object
    report: DefectReport
    wall: float
    serial_wall: float
    defect_csv: str
    timing_csv: str


def run_parareal(cfg: SimulationConfig, quiet: bool = False,
                 need_reference: bool = True) -> PararealResult:
    """Space-time parallel run; writes the defect and timing CSVs."""
    spec = cfg.spec()
    bc = cfg.boundary()
    flags = cfg.cell_flags()
    ps_fine = PropagatorSpec(dt=cfg.dt_fine, params=cfg.params())
    ps_coarse = PropagatorSpec(dt=cfg.dt_coarse, params=cfg.params())
    pcfg = cfg.parareal()

    reference = None
    serial_wall = float("nan")
    if need_reference:
        reference, serial_wall = serial_reference(cfg, quiet=quiet)

    initial = new_state(spec)
    result: EngineResult = run_parareal_engine(
        pcfg, initial, ps_fine, ps_coarse, spec, bc, flags,
        n_space=cfg.n_space, reference=reference,
    )

    os.makedirs(cfg.out_dir, exist_ok=True)
    defect_csv = os.path.join(cfg.out_dir, f"defects_{cfg.name}_nt{cfg.n_time}.csv")
    result.report.write_csv(defect_csv)
    timing_csv = os.path.join(cfg.out_dir, f"timings_{cfg.name}_nt{cfg.n_time}.csv")
    write_timings(timing_csv, result, serial_wall, cfg)
    if not quiet:
        print(
            f"parareal {cfg.name}: N_t={cfg.n_time} N_s={cfg.n_space} "
            f"N_it={cfg.n_iterations} wall={result.wall:.2f}s"
        )
        for row in result.report.rows:
            print(
                f"  k={row.iteration}: defects u={row.defect_u:.3e} "
                f"v={row.defect_v:.3e} w={row.defect_w:.3e} p={row.defect_p:.3e}"
            )
    return PararealResult(
        final=result.final, report=result.report, wall=result.wall,
        serial_wall=serial_wall, defect_csv=defect_csv, timing_csv=timing_csv,
    )


def write_timings(path, result: EngineResult, serial_wall, cfg: SimulationConfig):
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["rank", "phase", "seconds"])
        for rank, phase, seconds in result.timings:
            writer.writerow([rank, phase, f"{seconds:.6f}"])
        writer.writerow([-1, "total_wall", f"{result.wall:.6f}"])
        if np.isfinite(serial_wall):
            writer.writerow([-1, "serial_wall", f"{serial_wall:.6f}"])
        writer.writerow([-1, "n_time", cfg.n_time])
        writer.writerow([-1, "n_space", cfg.n_space])
        writer.writerow([-1, "n_iterations", cfg.n_iterations])


def read_timings(path):
    import csv as _csv

    rows = []
    meta = {}
    with open(path, newline="") as fh:
        for rec in _csv.DictReader(fh):
            rank = int(rec["rank"])
            if rank < 0:
                meta[rec["phase"]] = float(rec["seconds"])
            else:
                rows.append((rank, rec["phase"], float(rec["seconds"])))
    return rows, meta


@dataclass
class SpeedupEntry:
    n_time: int
    n_space: int
    n_iterations: int
    serial_wall: float
    parallel_wall: float

    @property
    def measured(self):
        return self.serial_wall / self.parallel_wall

    @property
    def bound(self):
        return theoretical_speedup_bound(self.n_time, max(1, self.n_iterations))

    @property
    def efficiency(self):
        return self.measured / (self.n_time * self.n_space)


def report_speedup(entries) -> str:
    """Speedup table (measured vs the Parareal bound); asserts measured <= bound."""
    lines = [
        f"{'Nt':>4} {'Ns':>4} {'Nit':>4} {'serial[s]':>10} {'parallel[s]':>12} "
        f"{'speedup':>8} {'bound':>7} {'eff':>6}  note"
    ]
    for e in entries:
        if not np.isfinite(e.serial_wall):
            raise ValueError("missing serial baseline for the speedup report")
        note = ""
        if e.measured > e.bound:
            raise ValueError(
                f"measured speedup {e.measured:.2f} exceeds the Parareal bound "
                f"{e.bound:.2f} (Nt={e.n_time}, Nit={e.n_iterations})"
            )
        if e.measured >= 0.99 * e.bound:
            note = "at bound"
        elif e.measured < 1.0:
            note = "slower than serial"
        lines.append(
            f"{e.n_time:>4} {e.n_space:>4} {e.n_iterations:>4} "
            f"{e.serial_wall:>10.2f} {e.parallel_wall:>12.2f} "
            f"{e.measured:>8.2f} {e.bound:>7.2f} {e.efficiency:>6.2f}  {note}"
        )
    return "\n".join(lines)


def speedup_entry_from_timing(path) -> SpeedupEntry:
    _, meta = read_timings(path)
    if "serial_wall" not in meta:
        raise ValueError(f"{path}: no serial baseline recorded")
    return SpeedupEntry(
        n_time=int(meta["n_time"]),
        n_space=int(meta["n_space"]),
        n_iterations=int(meta["n_iterations"]),
        serial_wall=meta["serial_wall"],
        parallel_wall=meta["total_wall"],
    )
