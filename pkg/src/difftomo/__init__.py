"""Simulation and reconstruction for discrete 3D tomographic phase retrieval."""
from .lattice import LatticeSpec, Object3D, dirichlet_kernel, interpolate
from .projector import Direction, Family, Projection2D, project, phase_projection, hybrid_projection, support_bounds

__version__ = "0.1.0"

__all__ = [
    "LatticeSpec",
    "Object3D",
    "dirichlet_kernel",
    "interpolate",
    "Direction",
    "Family",
    "Projection2D",
    "project",
    "phase_projection",
    "hybrid_projection",
    "support_bounds",
]
