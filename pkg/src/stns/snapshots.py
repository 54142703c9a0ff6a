"""Field snapshot output: legacy-VTK ASCII and the STNS1 binary dump.

The binary format is the bit-exact restart/reference layout::

    bytes 0..4   magic b"STNS1"
    3 x int64    cell counts nx, ny, nz (little endian)
    1 x float64  simulation time
    float64[]    u faces,  shape (nx+1, ny, nz), C order
    float64[]    v faces,  shape (nx, ny+1, nz)
    float64[]    w faces,  shape (nx, ny, nz+1)
    float64[]    p cells,  shape (nx, ny, nz)

Only interior faces/cells are stored; ghost layers are rebuilt by the
boundary-condition refresh after loading.
"""

from __future__ import annotations

import numpy as np

from .mesh import Domain, FlowState, GridSpec, interpolate_to_centers, new_state

MAGIC = b"STNS1"


def interior_views(state: FlowState, nloc):
    nx, ny, nz = nloc
    return (
        state.u[1 : nx + 2, 2 : ny + 2, 2 : nz + 2],
        state.v[2 : nx + 2, 1 : ny + 2, 2 : nz + 2],
        state.w[2 : nx + 2, 2 : ny + 2, 1 : nz + 2],
        state.p[1 : nx + 1, 1 : ny + 1, 1 : nz + 1],
    )


def pack_state(state: FlowState, nloc) -> dict:
    """Ghost-free copy of a state, for storage and messaging."""
    u, v, w, p = interior_views(state, nloc)
    return {"u": u.copy(), "v": v.copy(), "w": w.copy(), "p": p.copy(), "t": state.t}


def unpack_state(packed: dict, nloc) -> FlowState:
    nx, ny, nz = nloc
    state = FlowState(
        u=np.zeros((nx + 4, ny + 4, nz + 4)),
        v=np.zeros((nx + 4, ny + 4, nz + 4)),
        w=np.zeros((nx + 4, ny + 4, nz + 4)),
        p=np.zeros((nx + 2, ny + 2, nz + 2)),
        t=packed["t"],
    )
    u, v, w, p = interior_views(state, nloc)
    u[...] = packed["u"]
    v[...] = packed["v"]
    w[...] = packed["w"]
    p[...] = packed["p"]
    return state


def write_binary(path, state: FlowState, spec: GridSpec):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        np.asarray([spec.nx, spec.ny, spec.nz], dtype="<i8").tofile(fh)
        np.asarray([state.t], dtype="<f8").tofile(fh)
        for arr in interior_views(state, spec.shape):
            np.ascontiguousarray(arr, dtype="<f8").tofile(fh)


def read_binary(path) -> tuple[FlowState, GridSpec]:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not an STNS1 dump (magic {magic!r})")
        nx, ny, nz = (int(x) for x in np.fromfile(fh, dtype="<i8", count=3))
        t = float(np.fromfile(fh, dtype="<f8", count=1)[0])
        spec = GridSpec(nx, ny, nz)
        state = new_state(spec)
        state.t = t
        for arr in interior_views(state, spec.shape):
            data = np.fromfile(fh, dtype="<f8", count=arr.size)
            if data.size != arr.size:
                raise ValueError(f"{path}: truncated dump")
            arr[...] = data.reshape(arr.shape)
    return state, spec


def write_vtk(path, state: FlowState, domain: Domain, title="stns snapshot"):
    """Legacy structured-points ASCII file with cell-centered u, v, w, p.

    Cell centers are written as the point lattice (ORIGIN at h/2), one
    SCALARS block per component, x fastest per VTK convention.
    """
    spec = domain.spec
    uc, vc, wc, pc = interpolate_to_centers(state, domain)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 2.0\n")
        fh.write(f"{title} t={state.t:.17g}\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {spec.nx} {spec.ny} {spec.nz}\n")
        fh.write(
            f"ORIGIN {spec.hx / 2:.17g} {spec.hy / 2:.17g} {spec.hz / 2:.17g}\n"
        )
        fh.write(f"SPACING {spec.hx:.17g} {spec.hy:.17g} {spec.hz:.17g}\n")
        fh.write(f"POINT_DATA {spec.cells}\n")
        for name, arr in (("u", uc), ("v", vc), ("w", wc), ("p", pc)):
            fh.write(f"SCALARS {name} double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            flat = arr.transpose(2, 1, 0).ravel()
            for i in range(0, flat.size, 6):
                fh.write(" ".join(f"{x:.9e}" for x in flat[i : i + 6]))
                fh.write("\n")
