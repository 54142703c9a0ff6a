import multiprocessing as mp

import numpy as np
import pytest

from stns.decomposition import SerialComm, whole_grid_subdomain
from stns.discretization import FluidParams
from stns.mesh import BoundarySpec, CellFlags, GridSpec, PERIODIC, make_domain, new_state
from stns.parareal import PararealConfig, parareal_run
from stns.runtime import (
    WorkerCoord,
    build_topology,
    recv_state,
    run_parareal_engine,
    send_state,
    worker_id,
)
from stns.snapshots import interior_views, pack_state
from stns.stepper import PropagatorSpec, propagate

from conftest import fill_random_state


class TestTopology:
    def test_single_worker(self):
        topo = build_topology(1, 1)
        assert len(topo) == 1
        coord, spatial, tgroup = topo[0]
        assert coord == WorkerCoord(0, 0)
        assert spatial.members == (0,) and tgroup.members == (0,)

    def test_4x2(self):
        topo = build_topology(4, 2)
        assert len(topo) == 8
        spatial_groups = {t[1].members for t in topo}
        time_groups = {t[2].members for t in topo}
        assert len(spatial_groups) == 2          # one per time slice
        assert all(len(g) == 4 for g in spatial_groups)
        assert len(time_groups) == 4             # one per subdomain
        assert all(len(g) == 2 for g in time_groups)
        # worker (3, 1): rank 3 spatially, rank 1 temporally
        coord, spatial, tgroup = topo[worker_id(WorkerCoord(3, 1), 4)]
        assert coord == WorkerCoord(3, 1)
        assert spatial.rank == 3
        assert tgroup.rank == 1

    def test_total_product(self):
        assert len(build_topology(2, 8)) == 16

    def test_every_worker_in_one_group_of_each(self):
        topo = build_topology(3, 5)
        for wid, (coord, spatial, tgroup) in enumerate(topo):
            assert wid == worker_id(coord, 3)
            assert wid in spatial.members
            assert wid in tgroup.members

    def test_zero_counts_rejected(self):
        with pytest.raises(ValueError):
            build_topology(0, 4)


class TestSendRecv:
    def test_roundtrip_bitwise(self):
        spec = GridSpec(6, 6, 4, 1.0, 1.0, 0.5)
        st = fill_random_state(new_state(spec), seed=60)
        payload = pack_state(st, spec.shape)
        r, w = mp.get_context("fork").Pipe(duplex=False)
        send_state(w, payload)
        got = recv_state(r, like=payload)
        for key in ("u", "v", "w", "p"):
            assert np.array_equal(got[key], payload[key])
        assert got["t"] == payload["t"]

    def test_shape_mismatch_detected(self):
        spec = GridSpec(6, 6, 4, 1.0, 1.0, 0.5)
        st = fill_random_state(new_state(spec), seed=61)
        payload = pack_state(st, spec.shape)
        other = pack_state(new_state(GridSpec(4, 6, 4, 1.0, 1.0, 0.5)), (4, 6, 4))
        r, w = mp.get_context("fork").Pipe(duplex=False)
        send_state(w, other)
        with pytest.raises(ValueError):
            recv_state(r, like=payload)


class TestEngine:
    def _setup(self):
        spec = GridSpec(8, 8, 4, 1.0, 1.0, 0.5)
        bc = BoundarySpec(y_hi="moving_lid", z_lo=PERIODIC, z_hi=PERIODIC,
                          u_boundary=1.0)
        flags = CellFlags.all_fluid(spec)
        domain = make_domain(spec, bc, flags)
        params = FluidParams(re=500.0)
        ps_f = PropagatorSpec(dt=0.0005, params=params)
        ps_c = PropagatorSpec(dt=0.002, params=params)
        return spec, bc, flags, domain, ps_f, ps_c

    def test_engine_matches_sequential_bitwise(self):
        spec, bc, flags, domain, ps_f, ps_c = self._setup()
        init = new_state(spec)
        sub = whole_grid_subdomain(spec, bc)
        ref = propagate(init, 0.0, 0.02, ps_f, domain, sub, SerialComm())
        cfg = PararealConfig(t_end=0.02, dt_coarse=0.002, dt_fine=0.0005,
                             n_iterations=2, n_time=1)
        seq_final, seq_report = parareal_run(cfg, init, ps_f, ps_c, domain,
                                             reference=ref)
        for n_time in (1, 2, 4):
            cfg_n = PararealConfig(t_end=0.02, dt_coarse=0.002, dt_fine=0.0005,
                                   n_iterations=2, n_time=n_time)
            res = run_parareal_engine(cfg_n, init, ps_f, ps_c, spec, bc, flags,
                                      n_space=1, reference=ref)
            for a, b in zip(interior_views(seq_final, spec.shape),
                            interior_views(res.final, spec.shape)):
                assert np.array_equal(a, b)
            for row_a, row_b in zip(seq_report.rows, res.report.rows):
                assert row_a.defects() == row_b.defects()

    def test_space_time_engine_matches(self):
        spec, bc, flags, domain, ps_f, ps_c = self._setup()
        init = new_state(spec)
        cfg = PararealConfig(t_end=0.01, dt_coarse=0.002, dt_fine=0.0005,
                             n_iterations=1, n_time=2)
        base = run_parareal_engine(cfg, init, ps_f, ps_c, spec, bc, flags,
                                   n_space=1)
        combo = run_parareal_engine(cfg, init, ps_f, ps_c, spec, bc, flags,
                                    n_space=2)
        for a, b in zip(interior_views(base.final, spec.shape),
                        interior_views(combo.final, spec.shape)):
            assert np.array_equal(a, b)

    def test_timings_cover_all_ranks_and_phases(self):
        spec, bc, flags, domain, ps_f, ps_c = self._setup()
        cfg = PararealConfig(t_end=0.01, dt_coarse=0.002, dt_fine=0.0005,
                             n_iterations=1, n_time=2)
        res = run_parareal_engine(cfg, new_state(spec), ps_f, ps_c, spec, bc,
                                  flags, n_space=1)
        ranks = {r for r, _, _ in res.timings}
        phases = {p for _, p, _ in res.timings}
        assert ranks == {0, 1}
        assert {"fine", "coarse", "update"} <= phases
        assert len(res.report.rows) == cfg.n_iterations + 1

    def test_worker_failure_propagates(self):
        spec, bc, flags, domain, ps_f, ps_c = self._setup()
        # a dt too large for stability must abort the whole run with context
        bad_coarse = PropagatorSpec(dt=50.0, params=FluidParams(re=1000.0))
        cfg = PararealConfig(t_end=100.0, dt_coarse=50.0, dt_fine=50.0,
                             n_iterations=1, n_time=2)
        init = fill_random_state(new_state(spec), seed=62, scale=10.0)
        with pytest.raises(RuntimeError, match="time rank"):
            run_parareal_engine(cfg, init, bad_coarse, bad_coarse, spec, bc,
                                flags, n_space=1)
