"""Vectorized numpy implementations of the hot kernels.

Array conventions (shared by both backends):

* Velocity components are stored per subdomain with 2 ghost layers per side:
  shape ``(nx+4, ny+4, nz+4)`` for ``nx x ny x nz`` owned cells.  ``u[i,j,k]``
  is the x-face on the *right* side of local cell ``i-2`` (so the face between
  mask cells ``i`` and ``i+1``), at tangential cell centers ``j-2``, ``k-2``.
  ``v`` and ``w`` are analogous along y and z.
* Pressure has 1 ghost layer: shape ``(nx+2, ny+2, nz+2)``; ``p[i,j,k]`` is
  the center of local cell ``i-1, j-1, k-1``.
* ``mask`` is uint8 with velocity padding (shape ``(nx+4, ny+4, nz+4)``);
  ``mask[i,j,k] == 1`` iff local cell ``i-2, j-2, k-2`` is a FLUID cell inside
  the domain (periodic images count as inside, obstacle and out-of-domain
  cells do not).
* A velocity face is *valid* (holds a momentum unknown) iff both flanking
  cells are fluid: ``valid_u[i,j,k] = mask[i,j,k] & mask[i+1,j,k]``.  Invalid
  faces carry boundary data (walls, obstacle surfaces) and are never updated.

Convection uses the flux form d(a*phi)/dx per axis with the advecting
velocity averaged onto the control-volume face and the advected component
interpolated by the SMART-limited upwind rule

    phi_f = phi_U + 0.5 * psi(r) * (phi_U - phi_UU),
    r     = (phi_D - phi_U) / (phi_U - phi_UU),
    psi   = max(0, min(2r, 0.25 + 0.75r, 4)),

falling back to first-order upwind (psi = 0) where the second upwind
neighbor crosses a wall or an obstacle.
"""

from __future__ import annotations

import numpy as np


def smart_psi(r):
    """SMART limiter, elementwise on arrays or scalars."""
    r = np.asarray(r, dtype=np.float64)
    return np.maximum(0.0, np.minimum(np.minimum(2.0 * r, 0.25 + 0.75 * r), 4.0))


def _limited_face(phi_u, phi_d, phi_uu, uu_ok):
    """Face value from the SMART-limited upwind interpolation (vectorized)."""
    den = phi_u - phi_uu
    safe = den != 0.0
    r = np.where(safe, (phi_d - phi_u) / np.where(safe, den, 1.0), 0.0)
    psi = np.where(safe & (uu_ok != 0), smart_psi(r), 0.0)
    return phi_u + 0.5 * psi * den


def _upwind_select(a, lo, hi, lo_uu, hi_uu, ok_lo, ok_hi):
    """Pick (phi_U, phi_D, phi_UU, uu_ok) by the sign of the advecting velocity.

    ``lo``/``hi`` are the advected values on the low/high side of the CV face;
    ``lo_uu``/``hi_uu`` the second-upwind values for positive/negative
    advection; ``ok_lo``/``ok_hi`` their validity flags.
    """
    pos = a >= 0.0
    phi_u = np.where(pos, lo, hi)
    phi_d = np.where(pos, hi, lo)
    phi_uu = np.where(pos, lo_uu, hi_uu)
    uu_ok = np.where(pos, ok_lo, ok_hi)
    return phi_u, phi_d, phi_uu, uu_ok


def convective(u, v, w, valid_u, valid_v, valid_w, hx, hy, hz, out_u, out_v, out_w):
    """SMART-limited flux-form convection tendency for all three components."""
    _convective_component(0, u, u, v, w, valid_u, hx, hy, hz, out_u)
    _convective_component(1, v, u, v, w, valid_v, hx, hy, hz, out_v)
    _convective_component(2, w, u, v, w, valid_w, hx, hy, hz, out_w)


def _roll_index(base, axis, off):
    idx = list(base)
    s = idx[axis]
    idx[axis] = slice(s.start + off, s.stop + off)
    return tuple(idx)


def _convective_component(comp, f, u, v, w, valid_f, hx, hy, hz, out):
    """Convection of component ``comp`` (0=u,1=v,2=w) stored in ``f``.

    Works on the interior face window ``[2, n+2)`` per axis; everything
    outside (ghosts, walls) is left at zero.
    """
    h = (hx, hy, hz)
    adv_fields = (u, v, w)
    out[...] = 0.0

    n0, n1, n2 = (s - 4 for s in f.shape)
    core = (slice(2, 2 + n0), slice(2, 2 + n1), slice(2, 2 + n2))

    fvalid_core = valid_f[core]

    total = np.zeros_like(f[core])
    for axis in range(3):
        a_field = adv_fields[axis]
        if axis == comp:
            # CV faces sit at cell centers along the component's own axis.
            # East face of the CV of face i lies in cell i+1 (mask index),
            # flanked by faces i and i+1 of the same component.
            a_e = 0.5 * (f[core] + f[_roll_index(core, axis, 1)])
            a_w = 0.5 * (f[_roll_index(core, axis, -1)] + f[core])
            lo_e, hi_e = f[core], f[_roll_index(core, axis, 1)]
            lo_w, hi_w = f[_roll_index(core, axis, -1)], f[core]
            uu_e_pos = f[_roll_index(core, axis, -1)]
            uu_e_neg = f[_roll_index(core, axis, 2)]
            uu_w_pos = f[_roll_index(core, axis, -2)]
            uu_w_neg = f[_roll_index(core, axis, 1)]
            ok_e_pos = valid_f[_roll_index(core, axis, -1)]
            ok_e_neg = valid_f[_roll_index(core, axis, 2)]
            ok_w_pos = valid_f[_roll_index(core, axis, -2)]
            ok_w_neg = valid_f[_roll_index(core, axis, 1)]
        else:
            # CV faces sit at cell corners: average the advecting component
            # over its two faces straddling the momentum face.
            a_hi = 0.5 * (a_field[core] + a_field[_roll_index(core, comp, 1)])
            a_lo_idx = _roll_index(core, axis, -1)
            a_lo = 0.5 * (
                a_field[a_lo_idx] + a_field[_roll_index(a_lo_idx, comp, 1)]
            )
            a_e, a_w = a_hi, a_lo
            lo_e, hi_e = f[core], f[_roll_index(core, axis, 1)]
            lo_w, hi_w = f[_roll_index(core, axis, -1)], f[core]
            uu_e_pos = f[_roll_index(core, axis, -1)]
            uu_e_neg = f[_roll_index(core, axis, 2)]
            uu_w_pos = f[_roll_index(core, axis, -2)]
            uu_w_neg = f[_roll_index(core, axis, 1)]
            ok_e_pos = valid_f[_roll_index(core, axis, -1)]
            ok_e_neg = valid_f[_roll_index(core, axis, 2)]
            ok_w_pos = valid_f[_roll_index(core, axis, -2)]
            ok_w_neg = valid_f[_roll_index(core, axis, 1)]

        phi_u, phi_d, phi_uu, uu_ok = _upwind_select(
            a_e, lo_e, hi_e, uu_e_pos, uu_e_neg, ok_e_pos, ok_e_neg
        )
        phi_e = _limited_face(phi_u, phi_d, phi_uu, uu_ok)
        phi_u, phi_d, phi_uu, uu_ok = _upwind_select(
            a_w, lo_w, hi_w, uu_w_pos, uu_w_neg, ok_w_pos, ok_w_neg
        )
        phi_w_ = _limited_face(phi_u, phi_d, phi_uu, uu_ok)
        total += (a_e * phi_e - a_w * phi_w_) / h[axis]

    out[core] = np.where(fvalid_core != 0, -total, 0.0)


def diffusive(u, v, w, valid_u, valid_v, valid_w, hx, hy, hz, inv_re,
              out_u, out_v, out_w):
    """(1/Re) * 7-point Laplacian of each component at its own faces."""
    for f, valid_f, out in ((u, valid_u, out_u), (v, valid_v, out_v), (w, valid_w, out_w)):
        out[...] = 0.0
        n = tuple(s - 4 for s in f.shape)
        core = (slice(2, 2 + n[0]), slice(2, 2 + n[1]), slice(2, 2 + n[2]))
        lap = np.zeros_like(f[core])
        for axis, h in enumerate((hx, hy, hz)):
            lap += (
                f[_roll_index(core, axis, 1)]
                - 2.0 * f[core]
                + f[_roll_index(core, axis, -1)]
            ) / (h * h)
        valid = valid_f[core]
        out[core] = np.where(valid != 0, inv_re * lap, 0.0)


def divergence(u, v, w, mask, hx, hy, hz, out):
    """Staggered divergence per cell into a pressure-shaped array."""
    out[...] = 0.0
    n = tuple(s - 2 for s in out.shape)
    pc = (slice(1, 1 + n[0]), slice(1, 1 + n[1]), slice(1, 1 + n[2]))
    # cell (pi-1) has mask index pi+1; its faces are component index pi/pi+1
    cu = (slice(2, 2 + n[0]), slice(2, 2 + n[1]), slice(2, 2 + n[2]))
    div = (
        (u[cu] - u[_roll_index(cu, 0, -1)]) / hx
        + (v[cu] - v[_roll_index(cu, 1, -1)]) / hy
        + (w[cu] - w[_roll_index(cu, 2, -1)]) / hz
    )
    fluid = mask[cu]
    out[pc] = np.where(fluid != 0, div, 0.0)


def laplacian(p, mask, hx, hy, hz, out):
    """Mask-gated 7-point Laplacian of a cell field (Neumann legs dropped)."""
    out[...] = 0.0
    n = tuple(s - 2 for s in p.shape)
    pc = (slice(1, 1 + n[0]), slice(1, 1 + n[1]), slice(1, 1 + n[2]))
    cm = (slice(2, 2 + n[0]), slice(2, 2 + n[1]), slice(2, 2 + n[2]))
    acc = np.zeros_like(p[pc])
    for axis, h in enumerate((hx, hy, hz)):
        inv = 1.0 / (h * h)
        for off in (-1, 1):
            nb_mask = mask[_roll_index(cm, axis, off)]
            acc += (nb_mask != 0) * ((p[_roll_index(pc, axis, off)] - p[pc]) * inv)
    out[pc] = np.where(mask[cm] != 0, acc, 0.0)


def pressure_gradient_update(u, v, w, p, valid_u, valid_v, valid_w, dt, hx, hy, hz):
    """In-place projection update u -= dt * grad_h(p) on valid faces.

    Covers faces [1, n+2) along the component's own axis (the seam face
    included; its stencil reads the exchanged pressure ghost) and the owned
    cell rows [2, n+2) tangentially.
    """
    for comp, f, vf, h in ((0, u, valid_u, hx), (1, v, valid_v, hy), (2, w, valid_w, hz)):
        n = tuple(s - 4 for s in f.shape)
        core = [slice(2, 2 + n[0]), slice(2, 2 + n[1]), slice(2, 2 + n[2])]
        core[comp] = slice(1, 2 + n[comp])
        core = tuple(core)
        valid = vf[core]
        # face between mask cells i,i+1 -> p indices i-1, i (p pad is 1)
        pe = [slice(c.start - 1, c.stop - 1) for c in core]
        pe[comp] = slice(core[comp].start, core[comp].stop)
        pw = list(pe)
        pw[comp] = slice(core[comp].start - 1, core[comp].stop - 1)
        grad = (p[tuple(pe)] - p[tuple(pw)]) / h
        f[core] -= np.where(valid != 0, dt * grad, 0.0)


def pairwise_sum(x):
    """Deterministic sum of a 1-D array.

    The numpy fallback delegates to np.sum (pairwise); the numba backend uses
    its own fixed blocked tree.  Within one backend results are reproducible;
    the two backends may differ in the last ulp on reductions.
    """
    return float(np.sum(x))


def refresh_p_ghosts(p, wrap_x, wrap_y, wrap_z):
    """Fill the 1-wide ghost ring of a cell field in place (single subdomain)."""
    nx, ny, nz = (s - 2 for s in p.shape)
    if wrap_x:
        p[0, :, :] = p[nx, :, :]
        p[nx + 1, :, :] = p[1, :, :]
    else:
        p[0, :, :] = p[1, :, :]
        p[nx + 1, :, :] = p[nx, :, :]
    if wrap_y:
        p[:, 0, :] = p[:, ny, :]
        p[:, ny + 1, :] = p[:, 1, :]
    else:
        p[:, 0, :] = p[:, 1, :]
        p[:, ny + 1, :] = p[:, ny, :]
    if wrap_z:
        p[:, :, 0] = p[:, :, nz]
        p[:, :, nz + 1] = p[:, :, 1]
    else:
        p[:, :, 0] = p[:, :, 1]
        p[:, :, nz + 1] = p[:, :, nz]


def bicg_update_p(pv, r, v, beta, omega):
    pv[...] = r + beta * (pv - omega * v)


def bicg_update_s(s, r, alpha, v):
    s[...] = r - alpha * v


def bicg_update_x(x, alpha, pv, omega, s):
    x[...] = x + alpha * pv + omega * s


def bicg_update_r(r, s, omega, t):
    r[...] = s - omega * t
