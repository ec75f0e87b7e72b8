"""Karhunen-Loeve parametrisation of the log-permeability field."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import eigsh

from ..errors import ConfigurationError, TruncationError
from .grid import GridLevel, restriction_stride

# dense generalized solver below this many nodes, Lanczos above
_DENSE_LIMIT = 600
# relative eigenvalue gap under which eigenpairs are treated as one cluster
CLUSTER_RTOL = 1e-9
_TIE_RTOL = 1e-8


def build_covariance_matrix(points, sigma, lam):
    """Squared-exponential covariance ``sigma^2 exp(-|x-y|^2 / (2 lam^2))``."""
    if sigma <= 0 or lam <= 0:
        raise ConfigurationError(f"sigma and lambda must be positive, got {sigma}, {lam}")
    pts = np.asarray(points, dtype=np.float64)
    d2 = np.zeros((len(pts), len(pts)))
    for col in pts.T:
        diff = col[:, None] - col[None, :]
        d2 += diff * diff
    d2 *= -1.0 / (2.0 * lam**2)
    return sigma**2 * np.exp(d2, out=d2)


def trapezoid_weights(grid):
    """Tensor-product trapezoidal quadrature weights on a GridLevel (flattened)."""
    w1 = np.full(grid.m, grid.h)
    w1[0] = w1[-1] = 0.5 * grid.h
    return np.outer(w1, w1).ravel()


def eigen_clusters(values, rtol=CLUSTER_RTOL):
    """Group indices of a non-increasing spectrum into numerically equal runs."""
    clusters = [[0]] if len(values) else []
    for i in range(1, len(values)):
        if abs(values[i - 1] - values[i]) <= rtol * abs(values[i - 1]):
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


def _fix_sign(v):
    # first entry that is not round-off made positive
    big = np.max(np.abs(v))
    idx = np.flatnonzero(np.abs(v) > _TIE_RTOL * big)[0]
    return v if v[idx] > 0 else -v


def _canonical_cluster(block):
    """Rotate an eigenspace basis (n x k) into a basis-independent form.

    Pivot nodes are chosen greedily by residual row norm (first index among
    near-ties), then the basis is rotated so its values at the pivots form a
    lower-triangular matrix with positive diagonal.
    """
    k = block.shape[1]
    resid = block.copy()
    pivots = []
    for _ in range(k):
        norms = np.sqrt(np.sum(resid * resid, axis=1))
        p = int(np.flatnonzero(norms >= norms.max() * (1.0 - _TIE_RTOL))[0])
        pivots.append(p)
        r = resid[p] / norms[p]
        resid -= np.outer(resid @ r, r)
    q, upper = np.linalg.qr(block[pivots].T)
    q = q * np.sign(np.diag(upper))[None, :]
    return block @ q


def canonicalize(values, vectors):
    """Apply the sign convention (and cluster rotation for repeated eigenvalues).

    ``vectors`` holds eigenfunctions as columns.
    """
    out = vectors.copy()
    for cl in eigen_clusters(values):
        if len(cl) == 1:
            out[:, cl[0]] = _fix_sign(out[:, cl[0]])
        else:
            out[:, cl] = _canonical_cluster(out[:, cl])
    return out


def kl_decompose(cov, weights, n_modes):
    """Leading eigenpairs of the covariance operator under quadrature ``weights``.

    Solves ``C W phi = mu phi`` with ``phi^T W phi = 1`` and returns
    ``(eigenvalues, eigenfunctions)`` sorted by decreasing eigenvalue, with
    eigenfunctions as rows (``n_modes x n_points``).
    """
    cov = np.asarray(cov, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    n = cov.shape[0]
    if not 1 <= n_modes <= n:
        raise ConfigurationError(f"need 1 <= n_modes <= {n}, got {n_modes}")

    if n <= _DENSE_LIMIT:
        # C W phi = mu phi  <=>  (W C W) phi = mu W phi
        a = w[:, None] * cov * w[None, :]
        vals, vecs = sla.eigh(a, np.diag(w), subset_by_index=[n - n_modes, n - 1])
        vals, vecs = vals[::-1], vecs[:, ::-1]
    else:
        s = np.sqrt(w)
        sym = s[:, None] * cov * s[None, :]
        k = min(n_modes + 8, n - 1)
        v0 = np.random.default_rng(20201102).standard_normal(n)
        vals, vecs = eigsh(sym, k=k, which="LA", tol=0.0, v0=v0, ncv=min(n, max(2 * k + 1, 64)))
        order = np.argsort(vals)[::-1][:n_modes]
        vals, vecs = vals[order], vecs[:, order] / s[:, None]

    floor = 1e-12 * max(vals[0], 0.0)
    bad = np.flatnonzero(vals <= floor)
    if vals[0] <= 0 or bad.size:
        first = int(bad[0]) if bad.size else 0
        raise TruncationError(
            f"eigenvalue {first + 1} is {vals[first]:.3e}, below 1e-12 of the largest; "
            f"use at most {first} modes"
        )
    # re-normalise in the weighted inner product
    vecs = vecs / np.sqrt(np.sum(w[:, None] * vecs * vecs, axis=0))[None, :]
    vecs = canonicalize(vals, vecs)
    return vals, vecs.T


@dataclass(frozen=True)
class KLBasis:
    """Truncated KL basis defined on one grid.

    Attributes
    ----------
    eigenvalues : (R,) array, non-increasing
    eigenfunctions : (R, n_nodes) nodal values on ``grid``
    grid : GridLevel the basis was computed on
    sigma, lam : covariance hyperparameters
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    grid: GridLevel
    sigma: float
    lam: float

    @property
    def n_modes(self):
        return len(self.eigenvalues)

    @classmethod
    def build(cls, grid, n_modes, sigma=2.0, lam=0.3):
        cov = build_covariance_matrix(grid.coords, sigma, lam)
        vals, funcs = kl_decompose(cov, trapezoid_weights(grid), n_modes)
        return cls(vals, funcs, grid, float(sigma), float(lam))

    def scaled_modes(self, grid=None):
        """``sqrt(mu_i) * phi_i`` on ``grid`` as an ``(n_nodes, R)`` matrix."""
        funcs = self.eigenfunctions if grid is None else restrict_basis(self, grid)
        return np.ascontiguousarray((funcs * np.sqrt(self.eigenvalues)[:, None]).T)


def restrict_basis(basis, coarse):
    """Eigenfunction nodal values subsampled onto a nested coarser grid."""
    stride = restriction_stride(basis.grid, coarse)
    m = basis.grid.m
    funcs = basis.eigenfunctions.reshape(-1, m, m)[:, ::stride, ::stride]
    return np.ascontiguousarray(funcs.reshape(basis.n_modes, -1))


def log_permeability_field(theta, basis, grid=None):
    """Nodal values of ``sum_i sqrt(mu_i) phi_i theta_i`` on ``grid`` as ``(m, m)``."""
    grid = basis.grid if grid is None else grid
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (basis.n_modes,):
        raise ConfigurationError(f"theta must have length {basis.n_modes}, got {theta.shape}")
    return (basis.scaled_modes(grid) @ theta).reshape(grid.m, grid.m)


__all__ = [
    "KLBasis",
    "GridLevel",
    "build_covariance_matrix",
    "canonicalize",
    "eigen_clusters",
    "kl_decompose",
    "log_permeability_field",
    "restrict_basis",
    "trapezoid_weights",
]
