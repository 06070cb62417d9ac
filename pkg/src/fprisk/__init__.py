"""Fast collision-risk bounds for candidate robot paths among uncertain obstacles."""

from .errors import (FprError, GenerationError, InvalidInputError, InvalidShapeError,
                     PointObstacleError, SchemaError, UnsupportedShapeError)
from .fields import (LocationDensity, convolve_density, convolve_separable, gaussian_kernel,
                     integrate, integrate_product, ridge, ridge_crossing_integral)
from .geometry import (GridSpec, Polygon, Pose2, ScalarField, minkowski_dilate, polygon_area,
                       rasterize_polygon, swept_indicator)
from .oracle import McEstimate, mc_single, mc_total
from .paths import Path, generate_paths, load_paths, save_paths
from .risk import (EvalOptions, Obstacle, RiskFields, RiskReport, evaluate_paths, exact_total,
                   fpr_bound, laugier_exact, point_bound, precompute_fields)
from .scenario import Scenario, gen_scenario, load_scenario, save_scenario

__version__ = "0.1.0"

__all__ = [
    "FprError", "GenerationError", "InvalidInputError", "InvalidShapeError",
    "PointObstacleError", "SchemaError", "UnsupportedShapeError",
    "LocationDensity", "convolve_density", "convolve_separable", "gaussian_kernel",
    "integrate", "integrate_product", "ridge", "ridge_crossing_integral",
    "GridSpec", "Polygon", "Pose2", "ScalarField", "minkowski_dilate", "polygon_area",
    "rasterize_polygon", "swept_indicator",
    "McEstimate", "mc_single", "mc_total",
    "Path", "generate_paths", "load_paths", "save_paths",
    "EvalOptions", "Obstacle", "RiskFields", "RiskReport", "evaluate_paths", "exact_total",
    "fpr_bound", "laugier_exact", "point_bound", "precompute_fields",
    "Scenario", "gen_scenario", "load_scenario", "save_scenario",
]
