"""Nested uniform grids on the unit square."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class GridLevel:
    """Uniform ``m x m`` nodal grid on ``[0, 1]^2``.

    Nodal arrays are stored as ``(m, m)`` with index ``[j, i]`` for the node
    at ``(x1, x2) = (i*h, j*h)``; flattened index is ``j*m + i``.
    """

    level: int
    m: int
    coords: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 3:
            raise ConfigurationError(f"grid needs at least 3 points per side, got {self.m}")
        x = np.linspace(0.0, 1.0, self.m)
        x1, x2 = np.meshgrid(x, x)
        object.__setattr__(self, "coords", np.column_stack([x1.ravel(), x2.ravel()]))

    @property
    def h(self):
        return 1.0 / (self.m - 1)

    @property
    def axis(self):
        return np.linspace(0.0, 1.0, self.m)

    @property
    def n_nodes(self):
        return self.m * self.m


def side_length(m0, level):
    return 4**level * (m0 - 1) + 1


def build_grid_hierarchy(m0, n_levels):
    """Grids with ``4**l * (m0 - 1) + 1`` points per side, l = 0..n_levels-1."""
    if m0 < 3:
        raise ConfigurationError(f"m0 must be >= 3, got {m0}")
    if n_levels < 1:
        raise ConfigurationError(f"n_levels must be >= 1, got {n_levels}")
    return [GridLevel(level, side_length(m0, level)) for level in range(n_levels)]


def restriction_stride(fine, coarse):
    """Index stride mapping ``coarse`` nodes onto ``fine`` nodes.

    Raises ConfigurationError when the coarse grid is not nested in the fine one.
    """
    if (fine.m - 1) % (coarse.m - 1) != 0:
        raise ConfigurationError(
            f"grid with m={coarse.m} is not nested in grid with m={fine.m}"
        )
    return (fine.m - 1) // (coarse.m - 1)
