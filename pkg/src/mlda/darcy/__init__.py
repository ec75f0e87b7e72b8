"""Random-coefficient Darcy flow on the unit square with a multigrid hierarchy."""

from .grid import GridLevel, build_grid_hierarchy, restriction_stride
from .kl import (
    KLBasis,
    build_covariance_matrix,
    kl_decompose,
    log_permeability_field,
    restrict_basis,
    trapezoid_weights,
)
from .observe import ObservationOperator, lattice_locations, observe
from .problem import (
    DarcyForwardMap,
    DarcyProblem,
    generate_synthetic_data,
    read_field_csv,
    write_field_csv,
)
from .solver import BACKEND, solve_darcy, solve_darcy_edges

__all__ = [
    "BACKEND",
    "DarcyForwardMap",
    "DarcyProblem",
    "GridLevel",
    "KLBasis",
    "ObservationOperator",
    "build_covariance_matrix",
    "build_grid_hierarchy",
    "generate_synthetic_data",
    "kl_decompose",
    "lattice_locations",
    "log_permeability_field",
    "observe",
    "read_field_csv",
    "restrict_basis",
    "restriction_stride",
    "solve_darcy",
    "solve_darcy_edges",
    "trapezoid_weights",
    "write_field_csv",
]
