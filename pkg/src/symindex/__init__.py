"""Symplectic index computations: Conley-Zehnder and Maslov indices, Hamiltonian
flows, gauge capacities of convex bodies and toric action-index data."""

__version__ = "0.1.0"

from .czindex import IndexResult, cz_index, half_str, max_cz_index, rotation_cz
from .errors import SymIndexError
from .maslov import LagrangianPath, maslov_index, maslov_report
from .symcore import LagrangianFrame, SymmetricPath, SymplecticPath

__all__ = [
    "IndexResult",
    "LagrangianFrame",
    "LagrangianPath",
    "SymIndexError",
    "SymmetricPath",
    "SymplecticPath",
    "cz_index",
    "half_str",
    "max_cz_index",
    "maslov_index",
    "maslov_report",
    "rotation_cz",
]
