"""Small boundary patches in mixed Dirichlet-Neumann problems: FEM, capacities and layer operators."""

from . import asymptotics, capacity, fem, geometry, harness, layer_ops, meshing, tables
from .errors import *  # noqa: F401,F403
from .geometry import BoundaryPartition, DomainSpec, make_patch, standard_partition

__version__ = "0.1.0"
