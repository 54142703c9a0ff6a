"""Space-time-parallel incompressible Navier-Stokes solver.

Parareal over coarse time intervals combined with Cartesian domain
decomposition in space, discretized with a Chorin-Temam projection method on
a staggered mesh (SMART upwind convection, central diffusion, BiCGStab
pressure solves).  Ships a driven-cavity experiment harness.
"""

__version__ = "0.1.0"

from .discretization import BlowUpError, FluidParams
from .mesh import (
    BoundarySpec,
    CellFlags,
    FlowState,
    GridSpec,
    build_obstacle_flags,
    make_domain,
    new_state,
)
from .parareal import DefectReport, PararealConfig, theoretical_speedup_bound
from .stepper import PropagatorSpec, projection_step, propagate

__all__ = [
    "BlowUpError",
    "BoundarySpec",
    "CellFlags",
    "DefectReport",
    "FlowState",
    "FluidParams",
    "GridSpec",
    "PararealConfig",
    "PropagatorSpec",
    "build_obstacle_flags",
    "make_domain",
    "new_state",
    "projection_step",
    "propagate",
    "theoretical_speedup_bound",
    "__version__",
]
