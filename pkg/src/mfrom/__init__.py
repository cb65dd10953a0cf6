"""Multi-fidelity reduced-order modeling: POD / gappy-POD models corrected by a residual DeepONet."""

from .deeponet import DeepONetRegressor
from .gappy import GappyPOD
from .pipeline import GappyLF, MultiFidelityROM, PODRBF
from .pod import POD, SnapshotSet
from .rbf import RBFInterpolator

__all__ = ["DeepONetRegressor", "GappyLF", "GappyPOD", "MultiFidelityROM", "POD", "PODRBF",
           "RBFInterpolator", "SnapshotSet"]
__version__ = "0.1.0"
