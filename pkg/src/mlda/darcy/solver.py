"""Five-point finite-volume solve of ``-div(k grad p) = 0`` on the unit square.

Boundary conditions: ``p = 0`` on ``x1 = 0``, ``p = 1`` on ``x1 = 1`` and
zero flux on ``x2 = 0, 1``. Edge conductivities are harmonic means of the
nodal permeability; the SPD system is Jacobi-equilibrated and solved by
banded Cholesky with iterative refinement.

The compiled kernel is used when importable; set ``MLDA_PURE_PYTHON=1`` to
force the numpy fallback.
"""

import os

import numpy as np

from ..errors import NumericalError

if os.environ.get("MLDA_PURE_PYTHON"):
    from . import _pykernels as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _pykernels as _impl

        BACKEND = "python"

RESIDUAL_TOL = 1e-10


def _check(result, m):
    pressure, info, rel = result
    if info != 0:
        raise NumericalError(
            f"banded Cholesky failed on the {m}x{m} grid (LAPACK info={info}); "
            "the conductivities are not all positive and finite"
        )
    if not rel <= RESIDUAL_TOL:
        raise NumericalError(
            f"relative residual {rel:.3e} exceeds {RESIDUAL_TOL:g} on the {m}x{m} grid; "
            "the conductivity contrast is too large for double precision"
        )
    return pressure


def solve_darcy(log_k, grid=None, backend=None):
    """Nodal pressure ``(m, m)`` for a nodal log-permeability field ``(m, m)``."""
    log_k = np.ascontiguousarray(log_k, dtype=np.float64)
    if grid is not None and log_k.shape != (grid.m, grid.m):
        raise ValueError(f"field shape {log_k.shape} does not match grid m={grid.m}")
    if not np.all(np.isfinite(log_k)):
        raise NumericalError("log-permeability field has non-finite entries")
    impl = _impl if backend is None else backend
    return _check(impl.solve_nodal(log_k), log_k.shape[0])


def solve_darcy_edges(kx, ky, backend=None):
    """Nodal pressure for explicit edge conductivities.

    ``kx`` has shape ``(m, m-1)`` (edge between ``[j, i]`` and ``[j, i+1]``),
    ``ky`` has shape ``(m-1, m)`` (edge between ``[j, i]`` and ``[j+1, i]``).
    Useful for media whose coefficient is naturally defined per edge, e.g.
    layers with interfaces on grid lines.
    """
    kx = np.ascontiguousarray(kx, dtype=np.float64)
    ky = np.ascontiguousarray(ky, dtype=np.float64)
    m = kx.shape[0]
    if kx.shape != (m, m - 1) or ky.shape != (m - 1, m):
        raise ValueError(f"edge arrays have shapes {kx.shape}, {ky.shape}")
    impl = _impl if backend is None else backend
    return _check(impl.solve_edges(kx, ky), m)
