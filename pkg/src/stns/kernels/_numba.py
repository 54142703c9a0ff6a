"""Numba-jitted implementations of the hot kernels.

Same array conventions and arithmetic as ``_numpy`` (see that module's
docstring); expression trees are kept identical so both backends agree to
the last bit on stencil output.  fastmath stays off: the error-free
two-sum accumulation in ``expansion_dot``/``expansion_sum`` and bitwise
reproducibility both depend on strict IEEE semantics.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True, fastmath=False)


@njit(inline="always")
def _face_value(a, lo, hi, uu_pos, uu_neg, ok_pos, ok_neg):
    if a >= 0.0:
        phi_u = lo
        phi_d = hi
        phi_uu = uu_pos
        ok = ok_pos
    else:
        phi_u = hi
        phi_d = lo
        phi_uu = uu_neg
        ok = ok_neg
    den = phi_u - phi_uu
    if den != 0.0 and ok:
        r = (phi_d - phi_u) / den
        psi = min(min(2.0 * r, 0.25 + 0.75 * r), 4.0)
        psi = max(0.0, psi)
    else:
        psi = 0.0
    return phi_u + 0.5 * psi * den


@njit(**_JIT)
def _convective_component(comp, f, u, v, w, vf, hx, hy, hz, out):
    nx = f.shape[0] - 4
    ny = f.shape[1] - 4
    nz = f.shape[2] - 4
    ci = 1 if comp == 0 else 0
    cj = 1 if comp == 1 else 0
    ck = 1 if comp == 2 else 0
    out[:, :, :] = 0.0
    for i in range(2, nx + 2):
        for j in range(2, ny + 2):
            for k in range(2, nz + 2):
                if vf[i, j, k] == 0:
                    continue
                total = 0.0
                for axis in range(3):
                    if axis == 0:
                        ai, aj, ak = 1, 0, 0
                        h = hx
                        adv = u
                    elif axis == 1:
                        ai, aj, ak = 0, 1, 0
                        h = hy
                        adv = v
                    else:
                        ai, aj, ak = 0, 0, 1
                        h = hz
                        adv = w
                    if axis == comp:
                        a_e = 0.5 * (f[i, j, k] + f[i + ai, j + aj, k + ak])
                        a_w = 0.5 * (f[i - ai, j - aj, k - ak] + f[i, j, k])
                    else:
                        a_e = 0.5 * (
                            adv[i, j, k] + adv[i + ci, j + cj, k + ck]
                        )
                        a_w = 0.5 * (
                            adv[i - ai, j - aj, k - ak]
                            + adv[i - ai + ci, j - aj + cj, k - ak + ck]
                        )
                    p0 = f[i, j, k]
                    pp1 = f[i + ai, j + aj, k + ak]
                    pm1 = f[i - ai, j - aj, k - ak]
                    pp2 = f[i + 2 * ai, j + 2 * aj, k + 2 * ak]
                    pm2 = f[i - 2 * ai, j - 2 * aj, k - 2 * ak]
                    ok_m1 = vf[i - ai, j - aj, k - ak] != 0
                    ok_p1 = vf[i + ai, j + aj, k + ak] != 0
                    ok_p2 = vf[i + 2 * ai, j + 2 * aj, k + 2 * ak] != 0
                    ok_m2 = vf[i - 2 * ai, j - 2 * aj, k - 2 * ak] != 0
                    phi_e = _face_value(a_e, p0, pp1, pm1, pp2, ok_m1, ok_p2)
                    phi_w = _face_value(a_w, pm1, p0, pm2, pp1, ok_m2, ok_p1)
                    total += (a_e * phi_e - a_w * phi_w) / h
                out[i, j, k] = -total


def convective(u, v, w, valid_u, valid_v, valid_w, hx, hy, hz, out_u, out_v, out_w):
    _convective_component(0, u, u, v, w, valid_u, hx, hy, hz, out_u)
    _convective_component(1, v, u, v, w, valid_v, hx, hy, hz, out_v)
    _convective_component(2, w, u, v, w, valid_w, hx, hy, hz, out_w)


@njit(**_JIT)
def _diffusive_component(comp, f, vf, hx, hy, hz, inv_re, out):
    nx = f.shape[0] - 4
    ny = f.shape[1] - 4
    nz = f.shape[2] - 4
    out[:, :, :] = 0.0
    for i in range(2, nx + 2):
        for j in range(2, ny + 2):
            for k in range(2, nz + 2):
                if vf[i, j, k] == 0:
                    continue
                lap = (f[i + 1, j, k] - 2.0 * f[i, j, k] + f[i - 1, j, k]) / (
                    hx * hx
                )
                lap += (f[i, j + 1, k] - 2.0 * f[i, j, k] + f[i, j - 1, k]) / (
                    hy * hy
                )
                lap += (f[i, j, k + 1] - 2.0 * f[i, j, k] + f[i, j, k - 1]) / (
                    hz * hz
                )
                out[i, j, k] = inv_re * lap


def diffusive(u, v, w, valid_u, valid_v, valid_w, hx, hy, hz, inv_re,
              out_u, out_v, out_w):
    _diffusive_component(0, u, valid_u, hx, hy, hz, inv_re, out_u)
    _diffusive_component(1, v, valid_v, hx, hy, hz, inv_re, out_v)
    _diffusive_component(2, w, valid_w, hx, hy, hz, inv_re, out_w)


@njit(**_JIT)
def divergence(u, v, w, mask, hx, hy, hz, out):
    nx = out.shape[0] - 2
    ny = out.shape[1] - 2
    nz = out.shape[2] - 2
    out[:, :, :] = 0.0
    for pi in range(1, nx + 1):
        for pj in range(1, ny + 1):
            for pk in range(1, nz + 1):
                i = pi + 1
                j = pj + 1
                k = pk + 1
                if mask[i, j, k] == 0:
                    continue
                out[pi, pj, pk] = (
                    (u[i, j, k] - u[i - 1, j, k]) / hx
                    + (v[i, j, k] - v[i, j - 1, k]) / hy
                    + (w[i, j, k] - w[i, j, k - 1]) / hz
                )


@njit(**_JIT)
def laplacian(p, mask, hx, hy, hz, out):
    nx = p.shape[0] - 2
    ny = p.shape[1] - 2
    nz = p.shape[2] - 2
    ix = 1.0 / (hx * hx)
    iy = 1.0 / (hy * hy)
    iz = 1.0 / (hz * hz)
    out[:, :, :] = 0.0
    for pi in range(1, nx + 1):
        for pj in range(1, ny + 1):
            for pk in range(1, nz + 1):
                i = pi + 1
                j = pj + 1
                k = pk + 1
                if mask[i, j, k] == 0:
                    continue
                c = p[pi, pj, pk]
                acc = 0.0
                if mask[i - 1, j, k] != 0:
                    acc += (p[pi - 1, pj, pk] - c) * ix
                if mask[i + 1, j, k] != 0:
                    acc += (p[pi + 1, pj, pk] - c) * ix
                if mask[i, j - 1, k] != 0:
                    acc += (p[pi, pj - 1, pk] - c) * iy
                if mask[i, j + 1, k] != 0:
                    acc += (p[pi, pj + 1, pk] - c) * iy
                if mask[i, j, k - 1] != 0:
                    acc += (p[pi, pj, pk - 1] - c) * iz
                if mask[i, j, k + 1] != 0:
                    acc += (p[pi, pj, pk + 1] - c) * iz
                out[pi, pj, pk] = acc


@njit(**_JIT)
def _grad_update_component(comp, f, p, vf, dt, h):
    nx = f.shape[0] - 4
    ny = f.shape[1] - 4
    nz = f.shape[2] - 4
    ci = 1 if comp == 0 else 0
    cj = 1 if comp == 1 else 0
    ck = 1 if comp == 2 else 0
    # the seam face at index 1 along the component axis is updated too, so
    # the post-correction divergence of the first cell layer is consistent
    # (requires fresh pressure ghosts)
    for i in range(2 - ci, nx + 2):
        for j in range(2 - cj, ny + 2):
            for k in range(2 - ck, nz + 2):
                if vf[i, j, k] == 0:
                    continue
                # p index of the face's low-side cell is (vel index - 1)
                pe = p[i - 1 + ci, j - 1 + cj, k - 1 + ck]
                pw = p[i - 1, j - 1, k - 1]
                g = (pe - pw) / h
                f[i, j, k] = f[i, j, k] - dt * g


def pressure_gradient_update(u, v, w, p, valid_u, valid_v, valid_w, dt, hx, hy, hz):
    _grad_update_component(0, u, p, valid_u, dt, hx)
    _grad_update_component(1, v, p, valid_v, dt, hy)
    _grad_update_component(2, w, p, valid_w, dt, hz)


_BLOCK = 64


@njit(**_JIT)
def pairwise_sum(x):
    """Canonical blocked pairwise sum of a 1-D array.

    The reduction tree depends only on the length, so the result is bitwise
    reproducible and (for a fixed global layout) independent of how the data
    was produced.  Leaf blocks of 64 use four interleaved accumulators.
    """
    n = x.size
    nb = (n + _BLOCK - 1) // _BLOCK
    partial = np.empty(nb, np.float64)
    for b in range(nb):
        lo = b * _BLOCK
        hi = min(lo + _BLOCK, n)
        a0 = 0.0
        a1 = 0.0
        a2 = 0.0
        a3 = 0.0
        i = lo
        while i + 4 <= hi:
            a0 += x[i]
            a1 += x[i + 1]
            a2 += x[i + 2]
            a3 += x[i + 3]
            i += 4
        while i < hi:
            a0 += x[i]
            i += 1
        partial[b] = (a0 + a1) + (a2 + a3)
    while nb > 1:
        nb2 = (nb + _BLOCK - 1) // _BLOCK
        for b in range(nb2):
            lo = b * _BLOCK
            hi = min(lo + _BLOCK, nb)
            a0 = 0.0
            a1 = 0.0
            a2 = 0.0
            a3 = 0.0
            i = lo
            while i + 4 <= hi:
                a0 += partial[i]
                a1 += partial[i + 1]
                a2 += partial[i + 2]
                a3 += partial[i + 3]
                i += 4
            while i < hi:
                a0 += partial[i]
                i += 1
            partial[b] = (a0 + a1) + (a2 + a3)
        nb = nb2
    return partial[0] if n > 0 else 0.0


@njit(**_JIT)
def refresh_p_ghosts(p, wrap_x, wrap_y, wrap_z):
    """Fill the 1-wide ghost ring of a cell field in place (single subdomain).

    Periodic axes wrap, everything else copies the adjacent interior
    (homogeneous Neumann).  Face slabs are what the 7-point stencil reads;
    edge/corner values follow from the x, y, z fill order.
    """
    nx = p.shape[0] - 2
    ny = p.shape[1] - 2
    nz = p.shape[2] - 2
    for j in range(p.shape[1]):
        for k in range(p.shape[2]):
            if wrap_x:
                p[0, j, k] = p[nx, j, k]
                p[nx + 1, j, k] = p[1, j, k]
            else:
                p[0, j, k] = p[1, j, k]
                p[nx + 1, j, k] = p[nx, j, k]
    for i in range(p.shape[0]):
        for k in range(p.shape[2]):
            if wrap_y:
                p[i, 0, k] = p[i, ny, k]
                p[i, ny + 1, k] = p[i, 1, k]
            else:
                p[i, 0, k] = p[i, 1, k]
                p[i, ny + 1, k] = p[i, ny, k]
    for i in range(p.shape[0]):
        for j in range(p.shape[1]):
            if wrap_z:
                p[i, j, 0] = p[i, j, nz]
                p[i, j, nz + 1] = p[i, j, 1]
            else:
                p[i, j, 0] = p[i, j, 1]
                p[i, j, nz + 1] = p[i, j, nz]


@njit(**_JIT)
def bicg_update_p(pv, r, v, beta, omega):
    for i in range(pv.size):
        pv[i] = r[i] + beta * (pv[i] - omega * v[i])


@njit(**_JIT)
def bicg_update_s(s, r, alpha, v):
    for i in range(s.size):
        s[i] = r[i] - alpha * v[i]


@njit(**_JIT)
def bicg_update_x(x, alpha, pv, omega, s):
    for i in range(x.size):
        x[i] = x[i] + alpha * pv[i] + omega * s[i]


@njit(**_JIT)
def bicg_update_r(r, s, omega, t):
    for i in range(r.size):
        r[i] = s[i] - omega * t[i]
