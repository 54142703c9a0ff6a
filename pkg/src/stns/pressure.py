"""Pressure Poisson problem: mask-gated Laplacian, BiCGStab, nullspace handling.

The operator is the standard 7-point Laplacian with stencil legs into
obstacle cells or Neumann walls dropped (ghost = center closure) and
periodic legs wrapping, which keeps it symmetric and leaves constants in
the nullspace.  All-Neumann/periodic systems are singular: the right-hand
side is projected to zero fluid-mean before the solve and the solution
mean is removed afterwards.

BiCGStab is the plain unpreconditioned recurrence (a preconditioner hook is
reserved in the signature).  Dot products are injected so the distributed
path can supply decomposition-invariant exact reductions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .mesh import Domain


@dataclass
class SolveStats:
    iterations: int
    residual: float
    converged: bool
    breakdown: bool = False

    def ok(self):
        return self.converged and not self.breakdown


@dataclass
class PoissonProblem:
    """Solver settings for one pressure solve (rhs is held by the caller)."""

    tol_rel: float = 1e-10
    tol_abs: float = 1e-12
    max_iter: int = 0  # 0 -> derive from the grid

    @staticmethod
    def default_max_iter(n_cells: int) -> int:
        return min(5000, int(100 * round(n_cells ** (1.0 / 3.0))))


def bicgstab(apply_op, b, x0=None, tol_rel=1e-10, tol_abs=1e-12, max_iter=500,
             dot=None, precondition=None):
    """Unpreconditioned BiCGStab for a linear operator given as a callable.

    ``apply_op(x) -> A x`` must be linear; ``dot(a, b) -> float`` defaults to
    the plain numpy dot (the decomposed solver injects its deterministic
    global reduction).  Convergence is only declared after the explicitly
    recomputed residual ||b - A x||_2 meets the tolerance; that value is the
    one reported in SolveStats.
    """
    if precondition is not None:
        raise NotImplementedError("preconditioning is reserved for later")
    if dot is None:
        dot = lambda p, q: float(np.dot(p.ravel(), q.ravel()))

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - apply_op(x)
    r_hat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    pvec = np.zeros_like(b)
    s = np.empty_like(r)

    norm_b = np.sqrt(dot(b, b))
    tol = max(tol_rel * norm_b, tol_abs)
    res = np.sqrt(dot(r, r))
    iters = 0
    pending_breakdown = False
    confirmed_res = None

    while iters < max_iter:
        if res <= tol:
            r_true = b - apply_op(x)
            res = np.sqrt(dot(r_true, r_true))
            if res <= tol:
                confirmed_res = res
                break
            # recursion drifted: restart from the true residual
            r = r_true
            r_hat = r.copy()
            rho = alpha = omega = 1.0
            v[...] = 0.0
            pvec[...] = 0.0
        rho_new = dot(r_hat, r)
        if rho_new == 0.0 or omega == 0.0:
            pending_breakdown = True
            break
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        kernels.bicg_update_p(pvec.ravel(), r.ravel(), v.ravel(), beta, omega)
        v = apply_op(pvec)
        denom = dot(r_hat, v)
        if denom == 0.0:
            pending_breakdown = True
            break
        alpha = rho / denom
        kernels.bicg_update_s(s.ravel(), r.ravel(), alpha, v.ravel())
        t = apply_op(s)
        tt = dot(t, t)
        iters += 1
        if tt == 0.0:
            # s vanished: take the half step and stop
            x = x + alpha * pvec
            pending_breakdown = True
            break
        omega = dot(t, s) / tt
        kernels.bicg_update_x(x.ravel(), alpha, pvec.ravel(), omega, s.ravel())
        kernels.bicg_update_r(r.ravel(), s.ravel(), omega, t.ravel())
        res = np.sqrt(dot(r, r))

    if confirmed_res is None:
        r_final = b - apply_op(x)
        confirmed_res = np.sqrt(dot(r_final, r_final))
    converged = confirmed_res <= tol
    stats = SolveStats(
        iterations=iters,
        residual=confirmed_res,
        converged=converged,
        breakdown=pending_breakdown and not converged,
    )
    return x, stats


def remove_mean(p, domain: Domain, comm) -> float:
    """Subtract the global fluid-cell mean from p (in place); returns the mean."""
    n_fluid = int(domain.flags.fluid.sum())
    if n_fluid == 0:
        raise ValueError("no fluid cells")
    mean = comm.sum_field(p) / n_fluid
    core = tuple(slice(1, 1 + s) for s in domain.nloc)
    cm = tuple(slice(2, 2 + s) for s in domain.nloc)
    p[core] -= mean * (domain.mask[cm] != 0)
    return mean


class PressureOperator:
    """A p -> Laplacian(p) with the halo refresh the stencil requires.

    Applying the operator refreshes the input's 1-wide ghost ring in place
    (the per-Poisson-iteration pressure communication), then evaluates the
    mask-gated stencil.  Krylov vectors tolerate the ghost mutation: nothing
    reads their ghosts except this refresh.
    """

    def __init__(self, domain: Domain, sub, comm):
        self.domain = domain
        self.sub = sub
        self.comm = comm

    def __call__(self, p):
        d = self.domain
        self.comm.refresh_pressure(p, d, self.sub)
        out = np.empty_like(p)
        kernels.laplacian(p, d.mask, d.spec.hx, d.spec.hy, d.spec.hz, out)
        return out


def solve_pressure(rhs, x0, domain: Domain, sub, comm, problem: PoissonProblem):
    """Solve Laplacian(p) = rhs with compatibility projection and mean removal.

    ``rhs`` and ``x0`` are padded cell arrays; obstacle and ghost entries must
    be zero on entry.  Returns ``(p, stats)`` with the fluid mean of ``p``
    removed.  On breakdown the solve restarts once from the current iterate.
    """
    n_fluid = int(domain.flags.fluid.sum())
    mean = comm.sum_field(rhs) / n_fluid
    core = tuple(slice(1, 1 + s) for s in domain.nloc)
    cm = tuple(slice(2, 2 + s) for s in domain.nloc)
    rhs = rhs.copy()
    rhs[core] -= mean * (domain.mask[cm] != 0)

    op = PressureOperator(domain, sub, comm)
    dot = comm.dot
    max_iter = problem.max_iter or PoissonProblem.default_max_iter(domain.spec.cells)

    x, stats = bicgstab(
        op, rhs, x0=x0, tol_rel=problem.tol_rel, tol_abs=problem.tol_abs,
        max_iter=max_iter, dot=dot,
    )
    if stats.breakdown:
        x, stats = bicgstab(
            op, rhs, x0=x, tol_rel=problem.tol_rel, tol_abs=problem.tol_abs,
            max_iter=max_iter, dot=dot,
        )
    remove_mean(x, domain, comm)
    return x, stats
