"""Point observations of the nodal pressure by bilinear interpolation."""

import numpy as np

from ..errors import ConfigurationError


def lattice_locations(n_per_side=5):
    """``n x n`` interior lattice at ``k / (n + 1)``, k = 1..n, ordered x1-fastest."""
    t = np.arange(1, n_per_side + 1) / (n_per_side + 1)
    x1, x2 = np.meshgrid(t, t)
    return np.column_stack([x1.ravel(), x2.ravel()])


class ObservationOperator:
    """Bilinear interpolation at fixed locations, with per-grid weights cached."""

    def __init__(self, locations):
        locs = np.atleast_2d(np.asarray(locations, dtype=np.float64))
        if locs.ndim != 2 or locs.shape[1] != 2:
            raise ConfigurationError(f"locations must be (M, 2), got {locs.shape}")
        if np.any(locs < 0.0) or np.any(locs > 1.0) or not np.all(np.isfinite(locs)):
            raise ConfigurationError("observation locations must lie in [0, 1]^2")
        self.locations = locs
        self._cache = {}

    @property
    def n_obs(self):
        return len(self.locations)

    def weights(self, grid):
        """Flat corner indices ``(M, 4)`` and bilinear weights ``(M, 4)`` on ``grid``."""
        if grid.m not in self._cache:
            m, h = grid.m, grid.h
            s = self.locations / h
            cell = np.minimum(np.floor(s).astype(int), m - 2)
            t = s - cell
            i, j = cell[:, 0], cell[:, 1]
            tx, ty = t[:, 0], t[:, 1]
            idx = np.column_stack([j * m + i, j * m + i + 1, (j + 1) * m + i, (j + 1) * m + i + 1])
            w = np.column_stack([(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty])
            self._cache[grid.m] = (idx, w)
        return self._cache[grid.m]

    def __call__(self, pressure, grid):
        return observe(pressure, self, grid)


def observe(pressure, op, grid):
    """Interpolated pressure at each observation location (length M)."""
    idx, w = op.weights(grid)
    flat = np.asarray(pressure).ravel()
    return np.sum(flat[idx] * w, axis=1)
