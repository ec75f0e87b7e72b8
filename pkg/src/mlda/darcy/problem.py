"""The Darcy benchmark: KL-parametrised permeability, nested grids, point data."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..kernel import GaussianNoiseModel
from .grid import build_grid_hierarchy
from .kl import KLBasis
from .observe import ObservationOperator, lattice_locations, observe
from .solver import solve_darcy


class DarcyForwardMap:
    """``theta -> pressure at the observation points`` on one grid."""

    def __init__(self, grid, basis, obs):
        self.grid = grid
        self.obs = obs
        self.modes = basis.scaled_modes(grid)

    def log_permeability(self, theta):
        return (self.modes @ theta).reshape(self.grid.m, self.grid.m)

    def pressure(self, theta):
        return solve_darcy(self.log_permeability(theta), self.grid)

    def __call__(self, theta):
        return observe(self.pressure(theta), self.obs, self.grid)


@dataclass
class DarcyProblem:
    grids: list
    basis: KLBasis
    obs: ObservationOperator
    forward_maps: list
    noise: GaussianNoiseModel

    @classmethod
    def build(cls, m0=5, n_levels=3, n_modes=24, sigma=2.0, lam=0.3, obs_per_side=5,
              noise_std=0.01, locations=None):
        """Grids, KL basis (on the finest grid, restricted down) and forward maps."""
        grids = build_grid_hierarchy(m0, n_levels)
        basis = KLBasis.build(grids[-1], n_modes, sigma, lam)
        obs = ObservationOperator(lattice_locations(obs_per_side) if locations is None else locations)
        maps = [DarcyForwardMap(g, basis, obs) for g in grids]
        noise = GaussianNoiseModel.isotropic(obs.n_obs, noise_std)
        return cls(grids, basis, obs, maps, noise)


def generate_synthetic_data(theta_true, forward_map, noise, rng):
    """``d_obs = F(theta_true) + eps`` with ``eps ~ N(0, Sigma_eps)``.

    Returns ``(d_obs, clean)`` where ``clean`` is the noise-free model output.
    """
    clean = np.asarray(forward_map(np.asarray(theta_true, dtype=np.float64)))
    z = rng.standard_normal(clean.size)
    chol = sla.cholesky(noise.covariance, lower=True)
    return clean + chol @ z, clean


def write_field_csv(path, values, level, quantity):
    """Row-major nodal field (row = x2 index) under a one-line header."""
    values = np.asarray(values)
    m = values.shape[0]
    with open(path, "w", newline="") as fh:
        fh.write(f"level={level},m={m},quantity={quantity}\n")
        for row in values:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_field_csv(path):
    """Inverse of :func:`write_field_csv`; returns ``(values, header_dict)``."""
    with open(path) as fh:
        header = dict(item.split("=", 1) for item in fh.readline().strip().split(","))
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    header["level"] = int(header["level"])
    header["m"] = int(header["m"])
    return values, header
