"""Grid and closed-form tools for two-set growth competition on rotationally symmetric surfaces."""

__version__ = "0.1.0"

from .analytic import (
    Scenario,
    apollonius_omega1,
    escape_path,
    inner_ball_radius,
    omega1_profile,
    predicted_boundary,
    spiral_curve,
    spiral_sweep,
    tangency_angle,
    trapping_radius_bound,
    visibility_angle_bound,
)
from .errors import GrowthFrontError
from .grid import PolarGrid, build_grid
from .metric import SurfaceMetric, check_assumptions, conformal_classify, eval_G
from .solver import (
    boundary_residual,
    classify_boundedness,
    distance_field,
    extract_profile,
    omega_fixed_point,
    omega_step,
    solve,
    solve_with_doubling,
    time_slices,
)

__all__ = [
    "GrowthFrontError",
    "PolarGrid",
    "Scenario",
    "SurfaceMetric",
    "apollonius_omega1",
    "boundary_residual",
    "build_grid",
    "check_assumptions",
    "classify_boundedness",
    "conformal_classify",
    "distance_field",
    "escape_path",
    "eval_G",
    "extract_profile",
    "inner_ball_radius",
    "omega1_profile",
    "omega_fixed_point",
    "omega_step",
    "predicted_boundary",
    "solve",
    "solve_with_doubling",
    "spiral_curve",
    "spiral_sweep",
    "tangency_angle",
    "time_slices",
    "trapping_radius_bound",
    "visibility_angle_bound",
]
