"""Command-line entry point.

Subcommands:

* ``serial``       -- time-serial fine run (optionally space-parallel), snapshots
* ``parareal``     -- space-time parallel run, defect + timing CSVs
* ``decompose``    -- print the communication-cost analysis for a worker count
* ``report``       -- speedup table from recorded timing CSVs
* ``write-config`` -- emit a preset as an editable INI file

The kernel benchmark comparing the numba and numpy backends lives in
``benchmarks/bench_kernels.py``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .decomposition import comm_cost, factorizations, select_decomposition
from .harness import (
    DESK_HORIZONS,
    SimulationConfig,
    preset,
    read_config,
    report_speedup,
    run_parareal,
    run_serial,
    speedup_entry_from_timing,
    write_config,
)


def _load_config(args) -> SimulationConfig:
    if args.config:
        cfg = read_config(args.config)
    elif args.preset:
        cfg = preset(args.preset, desk_scale=not args.full_horizon)
    else:
        raise SystemExit("specify --config PATH or --preset sim1|sim2")
    updates = {}
    if args.np_space is not None:
        updates["n_space"] = args.np_space
    if args.np_time is not None:
        updates["n_time"] = args.np_time
    if args.iterations is not None:
        updates["n_iterations"] = args.iterations
    if args.out is not None:
        updates["out_dir"] = args.out
    if getattr(args, "snapshot_every", None) is not None:
        updates["snapshot_every"] = args.snapshot_every
    if getattr(args, "t_end", None) is not None:
        updates["t_end"] = args.t_end
    return replace(cfg, **updates) if updates else cfg


def _add_common(sub):
    sub.add_argument("--config", help="INI config file")
    sub.add_argument("--preset", choices=("sim1", "sim2"), help="shipped preset")
    sub.add_argument(
        "--full-horizon", action="store_true",
        help=f"use the full horizons instead of desk-scale {DESK_HORIZONS}",
    )
    sub.add_argument("--np-space", type=int, default=None, metavar="N")
    sub.add_argument("--np-time", type=int, default=None, metavar="N")
    sub.add_argument("--iterations", type=int, default=None, metavar="K")
    sub.add_argument("--out", default=None, metavar="DIR")
    sub.add_argument("--t-end", type=float, default=None, metavar="T")


def cmd_serial(args):
    cfg = _load_config(args)
    result = run_serial(cfg)
    from .snapshots import write_binary

    os.makedirs(cfg.out_dir, exist_ok=True)
    dump = os.path.join(cfg.out_dir, f"{cfg.name}_final.stns")
    write_binary(dump, result.final, cfg.spec())
    print(f"final state -> {dump}")
    if result.snapshots:
        print(f"snapshots: {len(result.snapshots)} VTK files in {cfg.out_dir}")
    return 0


def cmd_parareal(args):
    cfg = _load_config(args)
    result = run_parareal(cfg, need_reference=not args.no_reference)
    print(f"defect CSV -> {result.defect_csv}")
    print(f"timing CSV -> {result.timing_csv}")
    if cfg.snapshot_every > 0:
        from .mesh import make_domain
        from .snapshots import write_vtk

        path = os.path.join(cfg.out_dir, f"{cfg.name}_parareal_final.vtk")
        write_vtk(path, result.final,
                  make_domain(cfg.spec(), cfg.boundary(), cfg.cell_flags()))
        print(f"final snapshot -> {path}")
    return 0


def cmd_decompose(args):
    shape = (args.nx, args.ny, args.nz)
    print(f"grid {shape[0]} x {shape[1]} x {shape[2]}, P = {args.workers}")
    rows = []
    for triple in factorizations(args.workers):
        cost = comm_cost(*triple, *shape)
        rows.append((cost, triple))
    rows.sort()
    try:
        chosen = select_decomposition(args.workers, *shape).dims
    except ValueError:
        chosen = None
    print(f"{'Px':>4} {'Py':>4} {'Pz':>4} {'cost':>12}")
    for cost, triple in rows:
        mark = "  <- selected" if triple == chosen else ""
        print(f"{triple[0]:>4} {triple[1]:>4} {triple[2]:>4} {cost:>12.2f}{mark}")
    if chosen is None:
        print("no feasible decomposition (local extents below the stencil minimum)")
        return 1
    return 0


def cmd_report(args):
    entries = [speedup_entry_from_timing(path) for path in args.timings]
    print(report_speedup(entries))
    return 0


def cmd_write_config(args):
    cfg = preset(args.preset, desk_scale=not args.full_horizon)
    write_config(cfg, args.path)
    print(f"wrote {args.path}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="stns",
        description="Space-time-parallel incompressible Navier-Stokes solver",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("serial", help="time-serial fine run")
    _add_common(p)
    p.add_argument("--snapshot-every", type=float, default=None, metavar="T")
    p.set_defaults(func=cmd_serial)

    p = subs.add_parser("parareal", help="space-time parallel run")
    _add_common(p)
    p.add_argument("--snapshot-every", type=float, default=None, metavar="T",
                   help="also write a VTK snapshot of the final state")
    p.add_argument(
        "--no-reference", action="store_true",
        help="skip the serial reference (defect columns become NaN)",
    )
    p.set_defaults(func=cmd_parareal)

    p = subs.add_parser("decompose", help="communication-cost analysis")
    p.add_argument("workers", type=int)
    p.add_argument("--nx", type=int, default=32)
    p.add_argument("--ny", type=int, default=32)
    p.add_argument("--nz", type=int, default=32)
    p.set_defaults(func=cmd_decompose)

    p = subs.add_parser("report", help="speedup table from timing CSVs")
    p.add_argument("timings", nargs="+", help="timing CSV paths")
    p.set_defaults(func=cmd_report)

    p = subs.add_parser("write-config", help="emit a preset as an INI file")
    p.add_argument("preset", choices=("sim1", "sim2"))
    p.add_argument("path")
    p.add_argument("--full-horizon", action="store_true")
    p.set_defaults(func=cmd_write_config)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
