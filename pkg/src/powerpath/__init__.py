"""Power-weighted shortest paths through random point clouds.

Simulation and estimation toolkit for the scaling limit of power-weighted
shortest-path lengths: exact and certified-pruned path computation, Eikonal
conformal distances, and Monte-Carlo estimation of the normalizing constant.
"""

__version__ = "0.1.0"

from .geometry import (ConformalParams, DensityField, Domain, base_distance,
                       bump_density, conformal_cost, power_edge_weight,
                       two_bump_density, uniform_density)
from .pathengine import PathQuery, PathResult, shortest_path, shortest_path_exact, shortest_path_pruned
from .sampling import PointCloud, sample_iid, sample_poisson, thin, tube_restrict

__all__ = [
    "ConformalParams", "DensityField", "Domain", "PathQuery", "PathResult",
    "PointCloud", "base_distance", "bump_density", "conformal_cost",
    "power_edge_weight", "sample_iid", "sample_poisson", "shortest_path",
    "shortest_path_exact", "shortest_path_pruned", "thin", "tube_restrict",
    "two_bump_density", "uniform_density",
]
