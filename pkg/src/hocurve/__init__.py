"""High-order curve meshes by disparity minimization."""

from .geometry import CurveSpec, builtin, eval_curve, eval_d1, eval_d2, frenet
from .mesh import DofLayout, ParametricMesh, PhysicalMesh, interpolate_meshes, make_partition
from .disparity import Problem, check_validity, decompose_error, energy
from .optimizer import Config, OptimizeReport, optimize, optimize_constrained_per_element, preoptimize_linear

__version__ = "0.1.0"
