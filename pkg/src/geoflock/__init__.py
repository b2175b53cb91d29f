"""Kinetic alignment dynamics on constant-curvature spaces.

Particles carry positions on a circle, sphere, hyperbolic plane or flat
space; binary collisions move them toward geodesic midpoints.  The package
provides the geometry kernel, atomic measures with exact Wasserstein
distances, collision kernels and their contraction estimators, stochastic
and deterministic solvers, and a verification harness.
"""

from .errors import DomainError, NumericalError, ResourceError, UsageError
from .geometry import (
    ManifoldSpace,
    MidpointSet,
    Point,
    circle,
    distance,
    euclidean,
    exp_map,
    format_space,
    hyperbolic,
    log_map,
    midpoints,
    parse_space,
    point,
    point_symmetry,
    sample_ball,
    sample_uniform,
    sphere,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "NumericalError",
    "ResourceError",
    "UsageError",
    "ManifoldSpace",
    "MidpointSet",
    "Point",
    "circle",
    "distance",
    "euclidean",
    "exp_map",
    "format_space",
    "hyperbolic",
    "log_map",
    "midpoints",
    "parse_space",
    "point",
    "point_symmetry",
    "sample_ball",
    "sample_uniform",
    "sphere",
    "__version__",
]
