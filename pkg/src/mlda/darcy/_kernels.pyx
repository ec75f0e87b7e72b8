# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Darcy pressure solve: harmonic edge averaging, five-point
assembly into LAPACK banded storage, Jacobi-equilibrated Cholesky solve
with iterative refinement and residual check.

Same contract as ``_pykernels``; arrays are indexed ``[j, i]``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt
from scipy.linalg.cython_lapack cimport dpbtrf, dpbtrs

cnp.import_array()


cdef int MAX_REFINE = 3
cdef double REFINE_TOL = 1e-12


cdef double _residual(const double[:, ::1] kx, const double[:, ::1] ky, const double[::1] x,
                      const double[::1] b, const double[::1] d, double[::1] r) noexcept nogil:
    """``r = D (b - A x)`` on the unknowns; returns ``||r||``."""
    cdef int m = kx.shape[0]
    cdef int nc = m - 2
    cdef int i, j, u, c
    cdef double wy, tl, tr, tu, td, v, rn = 0.0
    for i in range(1, m - 1):
        c = i - 1
        for j in range(m):
            u = c * m + j
            wy = 0.5 if (j == 0 or j == m - 1) else 1.0
            tl = kx[j, i - 1] * wy
            tr = kx[j, i] * wy
            tu = ky[j, i] if j < m - 1 else 0.0
            td = ky[j - 1, i] if j > 0 else 0.0
            v = (tl + tr + tu + td) * x[u]
            if c > 0:
                v -= tl * x[u - m]
            if c < nc - 1:
                v -= tr * x[u + m]
            if j < m - 1:
                v -= tu * x[u + 1]
            if j > 0:
                v -= td * x[u - 1]
            r[u] = d[u] * (b[u] - v)
            rn += r[u] * r[u]
    return sqrt(rn)


cdef double _solve(const double[:, ::1] kx, const double[:, ::1] ky,
                   double[:, ::1] p, double[::1] ab, double[::1] b, double[::1] x,
                   double[::1] d, double[::1] r, int* info) noexcept nogil:
    cdef int m = kx.shape[0]
    cdef int nc = m - 2
    cdef int n = nc * m
    cdef int kd = m if nc > 1 else 1
    cdef int ldab = kd + 1
    cdef int nrhs = 1
    cdef char uplo = b'L'
    cdef int i, j, u, c, it
    cdef double wy, tl, tr, tu, td, bn = 0.0, rel

    for u in range(ldab * n):
        ab[u] = 0.0
    for i in range(1, m - 1):
        c = i - 1
        for j in range(m):
            u = c * m + j
            wy = 0.5 if (j == 0 or j == m - 1) else 1.0
            tl = kx[j, i - 1] * wy
            tr = kx[j, i] * wy
            tu = ky[j, i] if j < m - 1 else 0.0
            td = ky[j - 1, i] if j > 0 else 0.0
            ab[u * ldab] = tl + tr + tu + td
            if j < m - 1:
                ab[u * ldab + 1] = -tu
            if c < nc - 1:
                ab[u * ldab + m] = -tr
            b[u] = tr if c == nc - 1 else 0.0

    # Jacobi equilibration: factor D A D with D = diag(A)^-1/2
    for u in range(n):
        d[u] = 1.0 / sqrt(ab[u * ldab])
    for u in range(n):
        ab[u * ldab] = 1.0
        if u + 1 < n:
            ab[u * ldab + 1] *= d[u] * d[u + 1]
        if u + m < n and kd == m:
            ab[u * ldab + m] *= d[u] * d[u + m]
        x[u] = d[u] * b[u]
        bn += x[u] * x[u]
    bn = sqrt(bn) if bn > 0.0 else 1.0

    dpbtrf(&uplo, &n, &kd, &ab[0], &ldab, info)
    if info[0] != 0:
        return 1e300
    dpbtrs(&uplo, &n, &kd, &nrhs, &ab[0], &ldab, &x[0], &n, info)
    if info[0] != 0:
        return 1e300
    for u in range(n):
        x[u] *= d[u]
    rel = _residual(kx, ky, x, b, d, r) / bn
    for it in range(MAX_REFINE):
        if rel <= REFINE_TOL:
            break
        dpbtrs(&uplo, &n, &kd, &nrhs, &ab[0], &ldab, &r[0], &n, info)
        if info[0] != 0:
            return 1e300
        for u in range(n):
            x[u] += d[u] * r[u]
        rel = _residual(kx, ky, x, b, d, r) / bn

    for j in range(m):
        p[j, 0] = 0.0
        p[j, m - 1] = 1.0
        for i in range(1, m - 1):
            p[j, i] = x[(i - 1) * m + j]
    return rel


def solve_edges(kx, ky):
    """Solve for nodal pressure given edge conductivities.

    Returns ``(pressure, info, relative_residual)``.
    """
    cdef const double[:, ::1] kxv = np.ascontiguousarray(kx, dtype=np.float64)
    cdef const double[:, ::1] kyv = np.ascontiguousarray(ky, dtype=np.float64)
    cdef int m = kxv.shape[0]
    cdef int nc = m - 2
    cdef int kd = m if nc > 1 else 1
    cdef int info = 0
    cdef double rel
    p = np.empty((m, m))
    cdef double[:, ::1] pv = p
    cdef double[::1] ab = np.empty((kd + 1) * nc * m)
    cdef double[::1] b = np.empty(nc * m)
    cdef double[::1] x = np.empty(nc * m)
    cdef double[::1] d = np.empty(nc * m)
    cdef double[::1] r = np.empty(nc * m)
    with nogil:
        rel = _solve(kxv, kyv, pv, ab, b, x, d, r, &info)
    if info != 0:
        p[...] = np.nan
        return p, info, np.inf
    return p, 0, rel


def harmonic_edges(log_k):
    """Harmonic means of ``exp(log_k)`` on horizontal and vertical edges."""
    cdef const double[:, ::1] lk = np.ascontiguousarray(log_k, dtype=np.float64)
    cdef int m = lk.shape[0]
    cdef int i, j
    cdef double a, b
    kx = np.empty((m, m - 1))
    ky = np.empty((m - 1, m))
    cdef double[:, ::1] kxv = kx
    cdef double[:, ::1] kyv = ky
    cdef double[:, ::1] k = np.empty((m, m))
    with nogil:
        for j in range(m):
            for i in range(m):
                k[j, i] = exp(lk[j, i])
        for j in range(m):
            for i in range(m - 1):
                a = k[j, i]
                b = k[j, i + 1]
                kxv[j, i] = 2.0 * a * b / (a + b)
        for j in range(m - 1):
            for i in range(m):
                a = k[j, i]
                b = k[j + 1, i]
                kyv[j, i] = 2.0 * a * b / (a + b)
    return kx, ky


def solve_nodal(log_k):
    """Harmonic-average ``exp(log_k)`` onto edges, then solve."""
    kx, ky = harmonic_edges(log_k)
    return solve_edges(kx, ky)
