"""Momentum-equation spatial operators and the explicit tentative step.

Convection is the SMART-limited upwind scheme in flux form; diffusion and
the pressure gradient are second-order central.  All operators act on the
owned face core and return zero on obstacle and boundary faces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .mesh import Domain, FlowState


class BlowUpError(RuntimeError):
    """Raised when the explicit step produces non-finite or runaway fields."""


@dataclass(frozen=True)
class FluidParams:
    re: float

    def __post_init__(self):
        if not self.re > 0:
            raise ValueError(f"Reynolds number must be positive, got {self.re}")


@dataclass
class MomentumRHS:
    du: np.ndarray
    dv: np.ndarray
    dw: np.ndarray

    def add(self, other: "MomentumRHS") -> "MomentumRHS":
        self.du += other.du
        self.dv += other.dv
        self.dw += other.dw
        return self


def smart_limiter(r):
    """psi(r) = max(0, min(2r, 0.25 + 0.75r, 4)); bounded QUICK weighting."""
    return kernels.smart_psi(r)


def _rhs_like(state: FlowState) -> MomentumRHS:
    return MomentumRHS(
        np.zeros_like(state.u), np.zeros_like(state.v), np.zeros_like(state.w)
    )


def convective_terms(state: FlowState, domain: Domain) -> MomentumRHS:
    """-(u . grad)u per momentum face, limited upwind fluxes, zero on obstacles."""
    out = _rhs_like(state)
    kernels.convective(
        state.u, state.v, state.w, *domain.valid,
        domain.spec.hx, domain.spec.hy, domain.spec.hz,
        out.du, out.dv, out.dw,
    )
    return out


def diffusive_terms(state: FlowState, params: FluidParams, domain: Domain) -> MomentumRHS:
    """(1/Re) discrete Laplacian of each component at its own faces."""
    out = _rhs_like(state)
    kernels.diffusive(
        state.u, state.v, state.w, *domain.valid,
        domain.spec.hx, domain.spec.hy, domain.spec.hz, 1.0 / params.re,
        out.du, out.dv, out.dw,
    )
    return out


def tentative_velocity(state: FlowState, params: FluidParams, domain: Domain,
                       dt: float) -> FlowState:
    """Forward-Euler tentative step u* = u + dt*(diffusion + convection).

    Boundary-normal and obstacle faces keep their pinned values.  Returns a
    new state (pressure carried over); raises BlowUpError on non-finite
    output, the caller adds step diagnostics.
    """
    rhs = diffusive_terms(state, params, domain)
    rhs.add(convective_terms(state, domain))
    star = state.copy()
    star.u += dt * rhs.du
    star.v += dt * rhs.dv
    star.w += dt * rhs.dw
    if not star.all_finite():
        raise BlowUpError("tentative velocity is not finite")
    return star


def pressure_correct(star: FlowState, p, dt: float, domain: Domain) -> FlowState:
    """Projection update u = u* - dt * grad_h(p) on interior fluid faces."""
    kernels.pressure_gradient_update(
        star.u, star.v, star.w, p, *domain.valid, dt,
        domain.spec.hx, domain.spec.hy, domain.spec.hz,
    )
    return star
