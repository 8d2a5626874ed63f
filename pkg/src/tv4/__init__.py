"""Four-direction discrete total variation and interpolation-constrained TV.

Subpackages are plain modules; the names most scripts need are re-exported
here.
"""

from .diffops import apply_D2, apply_D2_adjoint, apply_D4, apply_D4_adjoint, apply_upwind
from .grid import GridError, group_l21_norm, inner_product
from .images import add_gaussian_noise, read_image, synth_fixture, write_image
from .interp import StarTag, apply_L, apply_L_adjoint, assemble_big_L, big_L_adjoint
from .prox import DownscaleOp, group_soft_threshold, project_affine, project_unit_ball, prox_quadratic
from .solver import (
    ProblemSpec,
    SolveReport,
    SolverConfig,
    default_config,
    default_lambda,
    lambda_sweep,
    relative_error,
    solve,
)
from .tv import MODELS, evaluate_tv, tv_aniso, tv_dual_eval, tv_iso, tv_prn, tv_upwind

__version__ = "0.1.0"

__all__ = [
    "GridError",
    "inner_product",
    "group_l21_norm",
    "apply_D2",
    "apply_D2_adjoint",
    "apply_D4",
    "apply_D4_adjoint",
    "apply_upwind",
    "StarTag",
    "apply_L",
    "apply_L_adjoint",
    "assemble_big_L",
    "big_L_adjoint",
    "MODELS",
    "tv_iso",
    "tv_aniso",
    "tv_upwind",
    "tv_prn",
    "tv_dual_eval",
    "evaluate_tv",
    "prox_quadratic",
    "group_soft_threshold",
    "project_unit_ball",
    "project_affine",
    "DownscaleOp",
    "ProblemSpec",
    "SolverConfig",
    "SolveReport",
    "default_config",
    "default_lambda",
    "solve",
    "lambda_sweep",
    "relative_error",
    "read_image",
    "write_image",
    "synth_fixture",
    "add_gaussian_noise",
]
