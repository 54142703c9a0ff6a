import numpy as np
import pytest

from stns.decomposition import SerialComm, whole_grid_subdomain
from stns.mesh import (
    BoundarySpec,
    GridSpec,
    PERIODIC,
    build_obstacle_flags,
    make_domain,
)
from stns.pressure import (
    PoissonProblem,
    PressureOperator,
    bicgstab,
    remove_mean,
    solve_pressure,
)


def _operator(spec, bc, flags=None):
    domain = make_domain(spec, bc, flags)
    sub = whole_grid_subdomain(spec, bc)
    return PressureOperator(domain, sub, SerialComm()), domain


def _dense_matrix(op, shape):
    """Assemble the operator densely by probing with unit vectors."""
    n = int(np.prod([s - 2 for s in shape]))
    core = tuple(slice(1, -1) for _ in range(3))
    cols = []
    for idx in range(n):
        e = np.zeros(shape)
        e[core].flat[idx] = 1.0
        cols.append(op(e)[core].ravel().copy())
    return np.array(cols).T


class TestApplyLaplacian:
    def test_constant_in_nullspace(self):
        spec = GridSpec(6, 6, 4, 1.0, 1.0, 1.0)
        bc = BoundarySpec(z_lo=PERIODIC, z_hi=PERIODIC)
        op, domain = _operator(spec, bc)
        p = np.full((8, 8, 6), 7.25)
        out = op(p)
        assert np.abs(out).max() <= 1e-14

    def test_quadratic_exactness_unit_spacing(self):
        spec = GridSpec(8, 6, 4, 8.0, 6.0, 4.0)  # h = 1
        bc = BoundarySpec()
        op, domain = _operator(spec, bc)
        p = np.zeros((10, 8, 6))
        for i in range(10):
            p[i, :, :] = (i - 0.5) ** 2  # x^2 at cell centers
        out = op(p)
        # interior cells away from the Neumann closure see exactly 2
        assert np.allclose(out[3:-3, 2:-2, 2:-2], 2.0, rtol=0, atol=1e-12)

    def test_symmetric_on_periodic_box_by_probing(self):
        spec = GridSpec(4, 4, 4, 1.0, 1.0, 1.0)
        bc = BoundarySpec(**{f"{a}_{s}": PERIODIC for a in "xyz" for s in ("lo", "hi")})
        op, _ = _operator(spec, bc)
        mat = _dense_matrix(op, (6, 6, 6))
        assert np.allclose(mat, mat.T, rtol=0, atol=1e-12)

    def test_symmetric_with_obstacles_and_walls(self):
        spec = GridSpec(4, 4, 4, 1.0, 1.0, 1.0)
        bc = BoundarySpec(z_lo=PERIODIC, z_hi=PERIODIC)
        flags = build_obstacle_flags(spec, [(0.25, 0.5, 0.25, 0.5, 0.25, 0.5)])
        op, _ = _operator(spec, bc, flags)
        mat = _dense_matrix(op, (6, 6, 6))
        assert np.allclose(mat, mat.T, rtol=0, atol=1e-12)


class TestBicgstab:
    def test_identity_operator_single_iteration(self):
        b = np.arange(1.0, 9.0)
        x, stats = bicgstab(lambda v: v.copy(), b, tol_rel=1e-12, max_iter=10)
        assert stats.iterations == 1
        assert stats.converged and not stats.breakdown
        assert np.allclose(x, b, rtol=0, atol=1e-14)

    def test_1d_dirichlet_poisson_vs_dense_lu(self):
        # 8-cell Dirichlet Laplacian, rhs = e_3; oracle: dense solve
        n = 8
        mat = np.zeros((n, n))
        for i in range(n):
            mat[i, i] = -2.0
            if i > 0:
                mat[i, i - 1] = 1.0
            if i < n - 1:
                mat[i, i + 1] = 1.0
        b = np.zeros(n)
        b[3] = 1.0
        expected = np.linalg.solve(mat, b)
        x, stats = bicgstab(lambda v: mat @ v, b, tol_rel=1e-14, tol_abs=0.0,
                            max_iter=100)
        assert stats.converged
        assert np.abs(x - expected).max() < 1e-12

    def test_singular_neumann_matches_pseudoinverse(self):
        spec = GridSpec(4, 4, 4, 1.0, 1.0, 1.0)
        bc = BoundarySpec()  # all walls: pure Neumann, singular
        op, domain = _operator(spec, bc)
        sub = whole_grid_subdomain(spec, bc)
        comm = SerialComm()

        rng = np.random.default_rng(5)
        rhs = np.zeros((6, 6, 6))
        rhs[1:-1, 1:-1, 1:-1] = rng.normal(size=(4, 4, 4))
        rhs[1:-1, 1:-1, 1:-1] -= rhs[1:-1, 1:-1, 1:-1].mean()  # zero-mean

        x, stats = solve_pressure(
            rhs, None, domain, sub, comm,
            PoissonProblem(tol_rel=1e-12, tol_abs=1e-14, max_iter=2000),
        )
        assert stats.converged

        mat = _dense_matrix(op, (6, 6, 6))
        expected = np.linalg.pinv(mat) @ rhs[1:-1, 1:-1, 1:-1].ravel()
        expected -= expected.mean()
        assert np.abs(x[1:-1, 1:-1, 1:-1].ravel() - expected).max() < 1e-10

    def test_reported_residual_reproducible(self):
        spec = GridSpec(6, 6, 4, 1.0, 1.0, 1.0)
        bc = BoundarySpec(z_lo=PERIODIC, z_hi=PERIODIC)
        op, domain = _operator(spec, bc)
        comm = SerialComm()
        rng = np.random.default_rng(7)
        b = np.zeros((8, 8, 6))
        b[1:-1, 1:-1, 1:-1] = rng.normal(size=(6, 6, 4))
        b[1:-1, 1:-1, 1:-1] -= b[1:-1, 1:-1, 1:-1].mean()
        x, stats = bicgstab(op, b, tol_rel=1e-10, tol_abs=1e-12, max_iter=1000,
                            dot=comm.dot)
        r = b - op(x)
        recomputed = np.sqrt(comm.dot(r, r))
        assert abs(recomputed - stats.residual) <= 1e-13 * max(stats.residual, 1e-300)

    def test_bitwise_reproducible(self):
        spec = GridSpec(6, 6, 4, 1.0, 1.0, 1.0)
        bc = BoundarySpec(z_lo=PERIODIC, z_hi=PERIODIC)
        domain = make_domain(spec, bc)
        sub = whole_grid_subdomain(spec, bc)
        comm = SerialComm()
        rng = np.random.default_rng(8)
        rhs = np.zeros((8, 8, 6))
        rhs[1:-1, 1:-1, 1:-1] = rng.normal(size=(6, 6, 4))
        x1, s1 = solve_pressure(rhs, None, domain, sub, comm, PoissonProblem())
        x2, s2 = solve_pressure(rhs, None, domain, sub, comm, PoissonProblem())
        assert np.array_equal(x1, x2)
        assert s1.iterations == s2.iterations
        assert s1.residual == s2.residual

    def test_max_iter_formula(self):
        assert PoissonProblem.default_max_iter(32 * 32 * 32) == 3200
        assert PoissonProblem.default_max_iter(32 * 32 * 5) == 1700
        assert PoissonProblem.default_max_iter(10**9) == 5000


class TestRemoveMean:
    def test_constant_becomes_zero(self):
        spec = GridSpec(4, 4, 4, 1.0, 1.0, 1.0)
        bc = BoundarySpec()
        domain = make_domain(spec, bc)
        p = np.zeros((6, 6, 6))
        p[1:-1, 1:-1, 1:-1] = 5.0
        remove_mean(p, domain, SerialComm())
        assert np.abs(p[1:-1, 1:-1, 1:-1]).max() < 1e-14

    def test_zero_mean_unchanged(self):
        spec = GridSpec(4, 4, 4, 1.0, 1.0, 1.0)
        bc = BoundarySpec()
        domain = make_domain(spec, bc)
        rng = np.random.default_rng(9)
        p = np.zeros((6, 6, 6))
        vals = rng.normal(size=(4, 4, 4))
        vals -= vals.mean()
        p[1:-1, 1:-1, 1:-1] = vals
        before = p.copy()
        remove_mean(p, domain, SerialComm())
        assert np.allclose(p, before, rtol=0, atol=1e-15)

    def test_fluid_only_mean_with_obstacles(self):
        spec = GridSpec(4, 4, 4, 1.0, 1.0, 1.0)
        bc = BoundarySpec()
        flags = build_obstacle_flags(spec, [(0.0, 0.25, 0.0, 0.25, 0.0, 0.25)])
        domain = make_domain(spec, bc, flags)
        rng = np.random.default_rng(10)
        p = np.zeros((6, 6, 6))
        p[1:-1, 1:-1, 1:-1] = rng.normal(size=(4, 4, 4))
        p[1:-1, 1:-1, 1:-1][flags.fluid == 0] = 0.0
        remove_mean(p, domain, SerialComm())
        fluid_vals = p[1:-1, 1:-1, 1:-1][flags.fluid != 0]
        # oracle: independent summation
        assert abs(sum(fluid_vals.tolist()) / fluid_vals.size) < 1e-15
        assert not p[1:-1, 1:-1, 1:-1][flags.fluid == 0].any()

    def test_requires_fluid_cells(self):
        spec = GridSpec(4, 4, 4, 1.0, 1.0, 1.0)
        bc = BoundarySpec()
        flags = build_obstacle_flags(spec, [(0.0, 1.0, 0.0, 1.0, 0.0, 1.0)])
        domain = make_domain(spec, bc, flags)
        with pytest.raises(ValueError):
            remove_mean(np.zeros((6, 6, 6)), domain, SerialComm())
