"""Tangential tensor heat flow on a bump graph surface with surface and intrinsic FEM."""

from .geometry import SurfaceChart, eval_geometry
from .mesh import lift, triangulate
from .bench import BenchmarkConfig, run

__all__ = ["SurfaceChart", "eval_geometry", "triangulate", "lift", "BenchmarkConfig", "run"]
__version__ = "0.1.0"
