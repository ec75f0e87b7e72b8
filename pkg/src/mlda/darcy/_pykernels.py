"""Pure numpy/scipy implementation of the Darcy pressure solve.

Mirrors ``_kernels.pyx`` operation for operation so both backends produce
the same banded system. Arrays are indexed ``[j, i]`` with ``j`` the x2
(row) index and ``i`` the x1 (column) index.
"""

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

# refinement passes reuse the factor when the first solve misses REFINE_TOL
MAX_REFINE = 3
REFINE_TOL = 1e-12


def harmonic_edges(log_k):
    """Harmonic means of ``exp(log_k)`` on horizontal and vertical edges."""
    k = np.exp(log_k)
    kx = 2.0 * k[:, :-1] * k[:, 1:] / (k[:, :-1] + k[:, 1:])
    ky = 2.0 * k[:-1, :] * k[1:, :] / (k[:-1, :] + k[1:, :])
    return kx, ky


def _transmissibilities(kx, ky):
    m = kx.shape[0]
    # half control volumes on the Neumann rows
    wy = np.ones(m)
    wy[0] = wy[-1] = 0.5
    tx = kx * wy[:, None]
    return tx, ky


def solve_edges(kx, ky):
    """Solve for nodal pressure given edge conductivities.

    Returns ``(pressure, info, relative_residual)``; ``info`` is the LAPACK
    status (non-zero means the factorisation failed). The residual is that of
    the Jacobi-equilibrated system, which stays meaningful when ``k`` spans
    many orders of magnitude and ``||b||`` collapses.
    """
    kx = np.ascontiguousarray(kx, dtype=np.float64)
    ky = np.ascontiguousarray(ky, dtype=np.float64)
    m = kx.shape[0]
    nc = m - 2
    n = nc * m
    tx, ty = _transmissibilities(kx, ky)

    # unknown u = (i - 1) * m + j, j fastest
    t_left = tx[:, 0:nc].T  # (nc, m), edge (i-1, i)
    t_right = tx[:, 1:nc + 1].T  # edge (i, i+1)
    t_up = np.zeros((nc, m))
    t_up[:, :-1] = ty[:, 1:nc + 1].T
    t_down = np.zeros((nc, m))
    t_down[:, 1:] = ty[:, 1:nc + 1].T

    diag = (t_left + t_right + t_up + t_down).ravel()
    rhs = np.zeros((nc, m))
    rhs[-1, :] = t_right[-1, :]  # p = 1 on x1 = 1
    rhs = rhs.ravel()

    kd = m if nc > 1 else 1
    ab = np.zeros((kd + 1, n))
    ab[0] = diag
    ab[1] = -t_up.ravel()
    if nc > 1:
        ab[m, : n - m] = -t_right[:-1, :].ravel()

    def apply(u):
        # A u on the unknowns only; Dirichlet values live in ``rhs``
        u = u.reshape(nc, m)
        out = diag.reshape(nc, m) * u
        out[1:] -= t_left[1:] * u[:-1]
        out[:-1] -= t_right[:-1] * u[1:]
        out[:, :-1] -= t_up[:, :-1] * u[:, 1:]
        out[:, 1:] -= t_down[:, 1:] * u[:, :-1]
        return out.ravel()

    # Jacobi equilibration: factor D A D with D = diag(A)^-1/2
    d = 1.0 / np.sqrt(diag)
    ab[0] = 1.0
    ab[1, :-1] *= d[:-1] * d[1:]
    if nc > 1:
        ab[m, : n - m] *= d[: n - m] * d[m:]
    try:
        factor = cholesky_banded(ab, lower=True, check_finite=False)
    except LinAlgError:
        return np.full((m, m), np.nan), 1, np.inf

    db = d * rhs
    bnorm = np.sqrt(np.sum(db * db))
    scale = bnorm if bnorm > 0 else 1.0
    sol = d * cho_solve_banded((factor, True), db, check_finite=False)
    res = d * (rhs - apply(sol))
    rel = np.sqrt(np.sum(res * res)) / scale
    for _ in range(MAX_REFINE):
        if rel <= REFINE_TOL:
            break
        sol = sol + d * cho_solve_banded((factor, True), res, check_finite=False)
        res = d * (rhs - apply(sol))
        rel = np.sqrt(np.sum(res * res)) / scale

    full = np.zeros((m, m))
    full[:, 1:nc + 1] = sol.reshape(nc, m).T
    full[:, -1] = 1.0
    return full, 0, rel


def solve_nodal(log_k):
    """Harmonic-average ``exp(log_k)`` onto edges, then solve."""
    kx, ky = harmonic_edges(np.asarray(log_k, dtype=np.float64))
    return solve_edges(kx, ky)
