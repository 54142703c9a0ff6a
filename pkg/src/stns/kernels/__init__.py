"""Hot-kernel backend selection.

The environment variable ``STNS_BACKEND`` picks the implementation:

* ``numba`` (default when numba imports): jitted loops, nogil, disk-cached.
* ``numpy``: pure-vectorized fallback with identical arithmetic.

Both backends expose the same functions; see ``_numpy`` for the array
conventions.  ``stns.kernels.BACKEND`` reports which one is active.
"""

from __future__ import annotations

import os

_requested = os.environ.get("STNS_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"STNS_BACKEND={_requested!r} not understood (use 'numba' or 'numpy')"
    )

if _requested == "numpy":
    BACKEND = "numpy"
else:
    try:
        import numba  # noqa: F401

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        BACKEND = "numpy"

if BACKEND == "numba":
    from ._numba import (
        bicg_update_p,
        bicg_update_r,
        bicg_update_s,
        bicg_update_x,
        convective,
        diffusive,
        divergence,
        laplacian,
        pairwise_sum,
        pressure_gradient_update,
        refresh_p_ghosts,
    )
else:
    from ._numpy import (
        bicg_update_p,
        bicg_update_r,
        bicg_update_s,
        bicg_update_x,
        convective,
        diffusive,
        divergence,
        laplacian,
        pairwise_sum,
        pressure_gradient_update,
        refresh_p_ghosts,
    )

from ._numpy import smart_psi  # cheap scalar/elementwise helper, one impl

__all__ = [
    "BACKEND",
    "bicg_update_p",
    "bicg_update_r",
    "bicg_update_s",
    "bicg_update_x",
    "convective",
    "diffusive",
    "divergence",
    "laplacian",
    "pairwise_sum",
    "pressure_gradient_update",
    "refresh_p_ghosts",
    "smart_psi",
    "warmup",
]


def warmup():
    """Force jit compilation on tiny arrays (no-op for the numpy backend).

    Called before forking workers and before benchmarks so compile time never
    lands inside a timed or parallel section.
    """
    import numpy as np

    vel = np.zeros((7, 7, 7))
    p = np.zeros((5, 5, 5))
    mask = np.ones((7, 7, 7), dtype=np.uint8)
    valid = (mask.copy(), mask.copy(), mask.copy())
    out = np.zeros_like(vel)
    convective(vel, vel, vel, *valid, 1.0, 1.0, 1.0, out, out.copy(), out.copy())
    diffusive(vel, vel, vel, *valid, 1.0, 1.0, 1.0, 1.0, out, out.copy(), out.copy())
    divergence(vel, vel, vel, mask, 1.0, 1.0, 1.0, p.copy())
    laplacian(p, mask, 1.0, 1.0, 1.0, p.copy())
    pressure_gradient_update(vel, vel.copy(), vel.copy(), p, *valid, 0.1, 1.0, 1.0, 1.0)
    refresh_p_ghosts(p.copy(), True, False, True)
    pairwise_sum(p.ravel().copy())
    flat = np.zeros(8)
    bicg_update_p(flat, flat.copy(), flat.copy(), 0.5, 0.5)
    bicg_update_s(flat, flat.copy(), 0.5, flat.copy())
    bicg_update_x(flat, 0.5, flat.copy(), 0.5, flat.copy())
    bicg_update_r(flat, flat.copy(), 0.5, flat.copy())
