import numpy as np
import pytest

from stns import kernels
from stns.decomposition import SerialComm, whole_grid_subdomain
from stns.discretization import FluidParams
from stns.mesh import (
    BoundarySpec,
    GridSpec,
    MOVING_LID,
    PERIODIC,
    make_domain,
    new_state,
)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    kernels.warmup()


@pytest.fixture
def cavity_small():
    """8x8x4 lid-driven cavity (periodic z), zero initial state."""
    spec = GridSpec(8, 8, 4, 1.0, 1.0, 0.5)
    bc = BoundarySpec(
        y_hi=MOVING_LID, z_lo=PERIODIC, z_hi=PERIODIC, u_boundary=1.0
    )
    domain = make_domain(spec, bc)
    return spec, bc, domain, new_state(spec)


@pytest.fixture
def periodic_box():
    """All-periodic 8^3 unit box."""
    spec = GridSpec(8, 8, 8, 1.0, 1.0, 1.0)
    bc = BoundarySpec(**{f"{a}_{s}": PERIODIC for a in "xyz" for s in ("lo", "hi")})
    domain = make_domain(spec, bc)
    return spec, bc, domain, new_state(spec)


@pytest.fixture
def serial_ctx():
    def make(spec, bc):
        return whole_grid_subdomain(spec, bc), SerialComm()

    return make


def fill_random_state(state, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    for f in (state.u, state.v, state.w):
        f[...] = scale * rng.normal(size=f.shape)
    state.p[...] = scale * rng.normal(size=state.p.shape)
    return state


def fluid_params(re=1000.0):
    return FluidParams(re=re)
