import os

import numpy as np
import pytest

from stns.harness import (
    SimulationConfig,
    SpeedupEntry,
    cavity49_boxes,
    config_roundtrip,
    preset,
    read_config,
    report_speedup,
    run_parareal,
    run_serial,
    serial_reference,
    speedup_entry_from_timing,
    write_config,
)
from stns.mesh import MOVING_LID, NOSLIP, PERIODIC
from stns.parareal import DefectReport


class TestPresets:
    def test_sim1_parameters(self):
        cfg = preset("sim1", desk_scale=False)
        assert (cfg.nx, cfg.ny, cfg.nz) == (32, 32, 5)
        assert (cfg.lx, cfg.ly, cfg.lz) == (1.0, 1.0, 0.1)
        assert cfg.t_end == 80.0
        assert cfg.dt_coarse == 0.01 and cfg.dt_fine == 0.001
        assert cfg.re == 1000.0 and cfg.u_boundary == 1.0
        assert cfg.bc_y_hi == MOVING_LID
        assert cfg.bc_z_lo == PERIODIC and cfg.bc_z_hi == PERIODIC
        assert cfg.bc_x_lo == cfg.bc_x_hi == cfg.bc_y_lo == NOSLIP

    def test_sim2_parameters(self):
        cfg = preset("sim2", desk_scale=False)
        assert (cfg.nx, cfg.ny, cfg.nz) == (32, 32, 32)
        assert (cfg.lx, cfg.ly, cfg.lz) == (1.0, 1.0, 1.0)
        assert cfg.t_end == 24.0
        assert cfg.dt_coarse == 0.01 and cfg.dt_fine == 0.001
        assert cfg.re == 1000.0
        assert cfg.obstacles == "cavity49"
        assert cfg.cell_flags().n_obstacle == 49 * 8

    def test_desk_scale_horizons(self):
        assert preset("sim1").t_end == 8.0
        assert preset("sim2").t_end == 2.4

    def test_49_boxes_layout(self):
        spec = preset("sim2").spec()
        boxes = cavity49_boxes(spec)
        assert len(boxes) == 49
        # evenly spaced centers at cell-index multiples of 4, z centered
        xs = sorted({0.5 * (b[0] + b[1]) for b in boxes})
        assert np.allclose(xs, [c / 32 for c in range(4, 29, 4)])
        assert all(b[4] == 15 / 32 and b[5] == 17 / 32 for b in boxes)

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            preset("sim3")


class TestConfigIO:
    def test_roundtrip_identity(self):
        for name in ("sim1", "sim2"):
            cfg = preset(name)
            assert config_roundtrip(cfg) == cfg

    def test_roundtrip_with_boxes(self, tmp_path):
        cfg = preset("sim1")
        cfg = SimulationConfig(**{**cfg.__dict__, "boxes": ((0.1, 0.2, 0.1, 0.2, 0.0, 0.1),)})
        path = tmp_path / "cfg.ini"
        write_config(cfg, path)
        assert read_config(path) == cfg
        assert config_roundtrip(read_config(path)) == cfg


class TestRunSerial:
    def test_zero_lid_stays_zero(self, tmp_path):
        cfg = SimulationConfig(
            name="nolid", nx=6, ny=6, nz=4, lz=0.5, u_boundary=0.0,
            bc_y_hi=NOSLIP, t_end=0.01, dt_fine=0.001,
            out_dir=str(tmp_path),
        )
        result = run_serial(cfg, quiet=True)
        for f in result.final.components():
            assert not f.any()

    def test_snapshots_written(self, tmp_path):
        cfg = SimulationConfig(
            name="snap", nx=6, ny=6, nz=4, lz=0.5, t_end=0.004,
            dt_fine=0.001, snapshot_every=0.002, out_dir=str(tmp_path),
        )
        result = run_serial(cfg, quiet=True)
        assert len(result.snapshots) == 2
        assert all(os.path.exists(p) for p in result.snapshots)

    def test_space_decomposition_equivalent(self, tmp_path):
        base = SimulationConfig(
            name="dec", nx=8, ny=8, nz=6, lz=0.5, t_end=0.005, dt_fine=0.001,
            out_dir=str(tmp_path),
        )
        ref = run_serial(base, quiet=True).final
        from dataclasses import replace

        got = run_serial(replace(base, n_space=2), quiet=True).final
        from stns.snapshots import interior_views

        for a, b in zip(interior_views(ref, base.spec().shape),
                        interior_views(got, base.spec().shape)):
            assert np.array_equal(a, b)


class TestReferenceCache:
    def test_cache_hit_is_bit_exact(self, tmp_path):
        cfg = SimulationConfig(
            name="cache", nx=6, ny=6, nz=4, lz=0.5, t_end=0.005,
            dt_fine=0.001, out_dir=str(tmp_path),
        )
        first, wall1 = serial_reference(cfg, quiet=True)
        assert os.path.exists(os.path.join(str(tmp_path), "refcache"))
        second, wall2 = serial_reference(cfg, quiet=True)
        assert wall2 == round(wall1, 6)  # recorded wall loaded, not recomputed
        from stns.snapshots import interior_views

        for a, b in zip(interior_views(first, cfg.spec().shape),
                        interior_views(second, cfg.spec().shape)):
            assert np.array_equal(a, b)

    def test_physics_change_invalidates(self, tmp_path):
        from dataclasses import replace

        cfg = SimulationConfig(
            name="cache2", nx=6, ny=6, nz=4, lz=0.5, t_end=0.005,
            dt_fine=0.001, out_dir=str(tmp_path),
        )
        assert cfg.physics_hash() != replace(cfg, re=500.0).physics_hash()
        assert cfg.physics_hash() != replace(cfg, t_end=0.01).physics_hash()
        # parallel counts do not affect the reference
        assert cfg.physics_hash() == replace(cfg, n_time=4).physics_hash()


class TestRunParareal:
    def test_csv_outputs_and_row_counts(self, tmp_path):
        cfg = SimulationConfig(
            name="pr", nx=6, ny=6, nz=4, lz=0.5, t_end=0.01,
            dt_coarse=0.002, dt_fine=0.001, n_iterations=2, n_time=2,
            out_dir=str(tmp_path),
        )
        result = run_parareal(cfg, quiet=True)
        report = DefectReport.read_csv(result.defect_csv)
        assert len(report.rows) == cfg.n_iterations + 1
        assert [r.iteration for r in report.rows] == [0, 1, 2]
        assert os.path.exists(result.timing_csv)
        entry = speedup_entry_from_timing(result.timing_csv)
        assert entry.n_time == 2 and entry.n_iterations == 2
        assert entry.parallel_wall > 0
        assert np.isfinite(entry.serial_wall)


class TestSpeedupReport:
    def test_arithmetic_and_at_bound_flag(self):
        entries = [SpeedupEntry(8, 1, 2, serial_wall=100.0, parallel_wall=25.0)]
        table = report_speedup(entries)
        assert "4.00" in table
        assert "at bound" in table

    def test_bound_from_eq7(self):
        e = SpeedupEntry(16, 1, 2, serial_wall=1.0, parallel_wall=1.0)
        assert e.bound == 8.0

    def test_slower_than_serial_reported(self):
        entries = [SpeedupEntry(4, 1, 1, serial_wall=10.0, parallel_wall=20.0)]
        table = report_speedup(entries)
        assert "slower than serial" in table

    def test_measured_above_bound_rejected(self):
        entries = [SpeedupEntry(4, 1, 2, serial_wall=100.0, parallel_wall=10.0)]
        with pytest.raises(ValueError):
            report_speedup(entries)

    def test_missing_baseline_rejected(self):
        entries = [SpeedupEntry(4, 1, 1, serial_wall=float("nan"), parallel_wall=1.0)]
        with pytest.raises(ValueError):
            report_speedup(entries)


class TestCli:
    def test_decompose_exit_codes(self, capsys):
        from stns.cli import main

        assert main(["decompose", "8", "--nx", "32", "--ny", "32", "--nz", "5"]) == 0
        out = capsys.readouterr().out
        assert "<- selected" in out
        assert main(["decompose", "64", "--nx", "4", "--ny", "4", "--nz", "4"]) == 1

    def test_write_config_roundtrip(self, tmp_path, capsys):
        from stns.cli import main

        path = tmp_path / "sim1.ini"
        assert main(["write-config", "sim1", str(path)]) == 0
        cfg = read_config(path)
        assert cfg.nx == 32 and cfg.t_end == 8.0

    def test_serial_cli(self, tmp_path, capsys):
        from stns.cli import main

        path = tmp_path / "tiny.ini"
        cfg = SimulationConfig(name="tiny", nx=6, ny=6, nz=4, lz=0.5,
                               t_end=0.002, dt_fine=0.001, out_dir=str(tmp_path))
        write_config(cfg, path)
        assert main(["serial", "--config", str(path)]) == 0
        assert os.path.exists(tmp_path / "tiny_final.stns")
