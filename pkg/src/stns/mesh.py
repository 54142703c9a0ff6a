"""Staggered Cartesian mesh, flow fields, boundary conditions, obstacles.

Layout (per subdomain of ``nx x ny x nz`` owned cells):

* ``u, v, w``: shape ``(nx+4, ny+4, nz+4)`` with 2 ghost layers; ``u[i,j,k]``
  is the x-face on the right side of local cell ``i-2`` (tangential indices
  are cell indices shifted by 2).  The face at local index 1 is the left
  domain wall / subdomain interface; owned faces live at ``[2, n+2)``.
* ``p``: shape ``(nx+2, ny+2, nz+2)`` with 1 ghost layer, cell ``i-1``.
* The fluid mask pads the cell flags with 2 ghost rings: 1 for in-domain
  FLUID cells (periodic images included), 0 for obstacles and beyond
  non-periodic walls.

Boundary fills use ghost mirroring: no-slip tangential ghosts
are anti-mirrors, slip ghosts plain mirrors, a moving lid extrapolates
``2*u_b - mirror``, wall-normal faces are pinned to zero, pressure ghosts
copy the adjacent interior (homogeneous Neumann).  Ghost refresh order is
wraps/exchanges first (x, y, z), then wall fills (x, y, z), so physical
boundaries always override exchanged data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

FLUID = np.uint8(1)
OBSTACLE = np.uint8(0)

NOSLIP = "noslip"
SLIP = "slip"
PERIODIC = "periodic"
MOVING_LID = "moving_lid"

_FACES = ("x_lo", "x_hi", "y_lo", "y_hi", "z_lo", "z_hi")
_KINDS = (NOSLIP, SLIP, PERIODIC, MOVING_LID)


@dataclass(frozen=True)
class GridSpec:
    """Uniform Cartesian grid: cell counts and physical edge lengths."""

    nx: int
    ny: int
    nz: int
    lx: float = 1.0
    ly: float = 1.0
    lz: float = 1.0

    def __post_init__(self):
        for n in (self.nx, self.ny, self.nz):
            if int(n) != n or n < 3:
                raise ValueError(f"cell counts must be integers >= 3, got {n}")
        for length in (self.lx, self.ly, self.lz):
            if not length > 0:
                raise ValueError(f"domain lengths must be positive, got {length}")

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz)

    @property
    def hx(self):
        return self.lx / self.nx

    @property
    def hy(self):
        return self.ly / self.ny

    @property
    def hz(self):
        return self.lz / self.nz

    @property
    def h(self):
        return (self.hx, self.hy, self.hz)

    @property
    def cells(self):
        return self.nx * self.ny * self.nz


@dataclass(frozen=True)
class BoundarySpec:
    """Per-face boundary conditions plus the lid speed."""

    x_lo: str = NOSLIP
    x_hi: str = NOSLIP
    y_lo: str = NOSLIP
    y_hi: str = NOSLIP
    z_lo: str = NOSLIP
    z_hi: str = NOSLIP
    u_boundary: float = 0.0

    def __post_init__(self):
        for name in _FACES:
            kind = getattr(self, name)
            if kind not in _KINDS:
                raise ValueError(f"unknown boundary kind {kind!r} on {name}")
        for axis, (lo, hi) in enumerate(self.pairs()):
            if (lo == PERIODIC) != (hi == PERIODIC):
                raise ValueError(
                    f"periodic boundaries must pair up on axis {axis}"
                )
        for name in _FACES:
            if getattr(self, name) == MOVING_LID and name != "y_hi":
                raise ValueError("moving lid is only supported on the y_hi face")

    def pairs(self):
        return (
            (self.x_lo, self.x_hi),
            (self.y_lo, self.y_hi),
            (self.z_lo, self.z_hi),
        )

    def kind(self, axis, side):
        return self.pairs()[axis][side]

    def periodic(self, axis):
        return self.pairs()[axis][0] == PERIODIC


class CellFlags:
    """Immutable FLUID/OBSTACLE tags per cell."""

    def __init__(self, fluid: np.ndarray):
        fluid = np.ascontiguousarray(fluid, dtype=np.uint8)
        fluid.setflags(write=False)
        self.fluid = fluid

    @classmethod
    def all_fluid(cls, spec: GridSpec) -> "CellFlags":
        return cls(np.ones(spec.shape, dtype=np.uint8))

    @property
    def n_obstacle(self) -> int:
        return int(self.fluid.size - self.fluid.sum())

    def __eq__(self, other):
        return isinstance(other, CellFlags) and np.array_equal(
            self.fluid, other.fluid
        )


def build_obstacle_flags(spec: GridSpec, boxes) -> CellFlags:
    """Flag cells whose centers fall inside any axis-aligned box.

    ``boxes`` is an iterable of ``(x0, x1, y0, y1, z0, z1)``; every box must
    lie inside the domain.  First-order cell enumeration: the test point is
    the cell center, interval ends inclusive.
    """
    fluid = np.ones(spec.shape, dtype=np.uint8)
    lens = (spec.lx, spec.ly, spec.lz)
    centers = [
        (np.arange(n) + 0.5) * h for n, h in zip(spec.shape, spec.h)
    ]
    for box in boxes:
        if len(box) != 6:
            raise ValueError(f"box must have 6 bounds, got {box!r}")
        inside = np.ones(spec.shape, dtype=bool)
        for axis in range(3):
            b0, b1 = box[2 * axis], box[2 * axis + 1]
            if not (0.0 <= b0 <= b1 <= lens[axis]):
                raise ValueError(f"box {box!r} extends outside the domain")
            c = centers[axis]
            sel = (c >= b0) & (c <= b1)
            shape = [1, 1, 1]
            shape[axis] = spec.shape[axis]
            inside &= sel.reshape(shape)
        fluid[inside] = OBSTACLE
    return CellFlags(fluid)


@dataclass(frozen=True)
class Domain:
    """Everything a kernel needs to act on one subdomain's local arrays.

    ``mask`` tags cells (pad 2); ``valid`` holds one face-validity array per
    velocity component (pad 2, built from the global flags so even the
    outermost stencil legs see correct data).
    """

    spec: GridSpec
    bc: BoundarySpec
    flags: CellFlags
    lo: tuple
    hi: tuple
    mask: np.ndarray = field(repr=False)
    valid: tuple = field(repr=False)

    @property
    def nloc(self):
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    def at_edge(self, axis, side):
        if side == 0:
            return self.lo[axis] == 0
        return self.hi[axis] == self.spec.shape[axis]

    def has_wall(self, axis, side):
        return self.at_edge(axis, side) and not self.bc.periodic(axis)


def _local_mask(spec, bc, flags, lo, hi, pad):
    """Cell fluid/inside tags for [lo-pad, hi+pad) per axis."""
    mask = np.zeros(tuple(h - l + 2 * pad for l, h in zip(lo, hi)), dtype=np.uint8)
    idx = []
    valid = []
    for axis in range(3):
        g = np.arange(lo[axis] - pad, hi[axis] + pad)
        n = spec.shape[axis]
        if bc.periodic(axis):
            idx.append(g % n)
            valid.append(np.ones(g.size, dtype=bool))
        else:
            idx.append(np.clip(g, 0, n - 1))
            valid.append((g >= 0) & (g < n))
    mask[...] = flags.fluid[np.ix_(idx[0], idx[1], idx[2])]
    for axis in range(3):
        shape = [1, 1, 1]
        shape[axis] = valid[axis].size
        mask *= valid[axis].reshape(shape).astype(np.uint8)
    return mask


def make_domain(spec, bc, flags=None, lo=None, hi=None) -> Domain:
    if flags is None:
        flags = CellFlags.all_fluid(spec)
    if flags.fluid.shape != spec.shape:
        raise ValueError("flags shape does not match the grid")
    lo = (0, 0, 0) if lo is None else tuple(lo)
    hi = spec.shape if hi is None else tuple(hi)
    mask = _local_mask(spec, bc, flags, lo, hi, 2)
    mask.setflags(write=False)
    # face validity from a pad-3 cell mask: face i sits between cells with
    # pad-3 indices i+1 and i+2 along its own axis
    wide = _local_mask(spec, bc, flags, lo, hi, 3)
    valid = []
    for comp in range(3):
        n4 = tuple(h - l + 4 for l, h in zip(lo, hi))
        lo_idx = [slice(1, 1 + n4[a]) for a in range(3)]
        hi_idx = list(lo_idx)
        hi_idx[comp] = slice(2, 2 + n4[comp])
        v = wide[tuple(lo_idx)] & wide[tuple(hi_idx)]
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        valid.append(v)
    return Domain(
        spec=spec, bc=bc, flags=flags, lo=lo, hi=hi, mask=mask, valid=tuple(valid)
    )


@dataclass
class FlowState:
    """Staggered velocities (2 ghost layers), pressure (1 layer), time."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def copy(self) -> "FlowState":
        return FlowState(
            self.u.copy(), self.v.copy(), self.w.copy(), self.p.copy(), self.t
        )

    def components(self):
        return (self.u, self.v, self.w, self.p)

    def velocity_max(self) -> float:
        return max(
            float(np.max(np.abs(self.u))),
            float(np.max(np.abs(self.v))),
            float(np.max(np.abs(self.w))),
        )

    def all_finite(self) -> bool:
        return all(bool(np.isfinite(a).all()) for a in self.components())


def new_state(spec: GridSpec) -> FlowState:
    """All-zero flow state for the full grid (fluid starts at rest)."""
    return new_local_state(spec.shape)


def new_local_state(nloc) -> FlowState:
    nx, ny, nz = nloc
    if min(nloc) < 1:
        raise ValueError(f"empty subdomain {nloc}")
    vel = lambda: np.zeros((nx + 4, ny + 4, nz + 4))
    return FlowState(u=vel(), v=vel(), w=vel(), p=np.zeros((nx + 2, ny + 2, nz + 2)), t=0.0)


def face_valid_mask(domain: Domain, comp: int) -> np.ndarray:
    """Faces carrying momentum unknowns (uint8, velocity shape)."""
    return domain.valid[comp]


def enforce_face_constraints(state: FlowState, domain: Domain):
    """Zero every non-momentum face in the owned core (obstacles, walls)."""
    n = domain.nloc
    core = tuple(slice(2, 2 + s) for s in n)
    for comp, f in enumerate((state.u, state.v, state.w)):
        f[core] *= domain.valid[comp][core]


def _wrap_axis(state: FlowState, axis: int, which: str):
    """Self-periodic ghost fill along one axis (single-subdomain case)."""
    if which in ("velocity", "both"):
        for f in (state.u, state.v, state.w):
            n = f.shape[axis] - 4
            sl = lambda a, b: tuple(
                slice(a, b) if ax == axis else slice(None) for ax in range(3)
            )
            f[sl(0, 2)] = f[sl(n, n + 2)]
            f[sl(n + 2, n + 4)] = f[sl(2, 4)]
    if which in ("pressure", "both"):
        p = state.p
        n = p.shape[axis] - 2
        sl = lambda a, b: tuple(
            slice(a, b) if ax == axis else slice(None) for ax in range(3)
        )
        p[sl(0, 1)] = p[sl(n, n + 1)]
        p[sl(n + 1, n + 2)] = p[sl(1, 2)]


def _index(axis, i):
    return tuple(i if ax == axis else slice(None) for ax in range(3))


def fill_wall(state: FlowState, domain: Domain, axis: int, side: int, which: str):
    """Ghost fill for one physical wall of this subdomain."""
    kind = domain.bc.kind(axis, side)
    if kind == PERIODIC:
        raise ValueError("periodic faces are handled by exchange, not walls")
    u_b = domain.bc.u_boundary
    ix = _index

    if which in ("velocity", "both"):
        comps = (state.u, state.v, state.w)
        for comp, f in enumerate(comps):
            n = f.shape[axis] - 4
            if comp == axis:
                # wall-normal: pin the wall face, odd-extend the ghost faces
                # (right-face indexing leaves one sub-wall face at the lo
                # side and two at the hi side)
                if side == 0:
                    f[ix(axis, 1)] = 0.0
                    f[ix(axis, 0)] = -f[ix(axis, 2)]
                else:
                    f[ix(axis, n + 1)] = 0.0
                    f[ix(axis, n + 2)] = -f[ix(axis, n)]
                    f[ix(axis, n + 3)] = -f[ix(axis, n - 1)]
            else:
                lid = kind == MOVING_LID and comp == 0
                if kind == SLIP:
                    sign, shift = 1.0, 0.0
                elif lid:
                    sign, shift = -1.0, 2.0 * u_b
                else:  # noslip, and the lid's spanwise component
                    sign, shift = -1.0, 0.0
                if side == 0:
                    f[ix(axis, 1)] = shift + sign * f[ix(axis, 2)]
                    f[ix(axis, 0)] = shift + sign * f[ix(axis, 3)]
                else:
                    f[ix(axis, n + 2)] = shift + sign * f[ix(axis, n + 1)]
                    f[ix(axis, n + 3)] = shift + sign * f[ix(axis, n)]

    if which in ("pressure", "both"):
        p = state.p
        n = p.shape[axis] - 2
        if side == 0:
            p[ix(axis, 0)] = p[ix(axis, 1)]
        else:
            p[ix(axis, n + 1)] = p[ix(axis, n)]


def fill_all_walls(state: FlowState, domain: Domain, which: str):
    for axis in range(3):
        for side in (0, 1):
            if domain.has_wall(axis, side):
                fill_wall(state, domain, axis, side, which)


def apply_boundary_conditions(state: FlowState, domain: Domain, which: str = "both") -> FlowState:
    """Single-subdomain ghost refresh: wraps, then walls, plus face pinning.

    Mutates ``state`` in place and returns it.
    """
    if which in ("velocity", "both"):
        enforce_face_constraints(state, domain)
    for axis in range(3):
        if domain.bc.periodic(axis) and domain.at_edge(axis, 0) and domain.at_edge(axis, 1):
            _wrap_axis(state, axis, which)
    fill_all_walls(state, domain, which)
    return state


def discrete_divergence(state: FlowState, domain: Domain) -> np.ndarray:
    """Staggered divergence per owned cell (zero on obstacle cells)."""
    n = domain.nloc
    out = np.zeros(tuple(s + 2 for s in n))
    kernels.divergence(
        state.u, state.v, state.w, domain.mask,
        domain.spec.hx, domain.spec.hy, domain.spec.hz, out,
    )
    return out[1:-1, 1:-1, 1:-1].copy()


def interpolate_to_centers(state: FlowState, domain: Domain):
    """Collocate velocities at cell centers (two-face average); copy p."""
    n = domain.nloc
    core = tuple(slice(2, 2 + s) for s in n)
    uc = 0.5 * (state.u[core] + state.u[_shifted(core, 0, -1)])
    vc = 0.5 * (state.v[core] + state.v[_shifted(core, 1, -1)])
    wc = 0.5 * (state.w[core] + state.w[_shifted(core, 2, -1)])
    pc = state.p[1:-1, 1:-1, 1:-1].copy()
    return uc, vc, wc, pc


def _shifted(core, axis, off):
    out = list(core)
    s = out[axis]
    out[axis] = slice(s.start + off, s.stop + off)
    return tuple(out)
