"""Prescribed curvature hypersurfaces between barriers, by homotopy continuation."""
from __future__ import annotations

__version__ = "0.1.0"

from .ambient import AmbientManifold, builtin, warped
from .continuation import ContinuationTrace, Schedule, continue_path
from .curvature import CurvatureFunction, make_curvature, principal_curvatures
from .errors import CurveSolveError
from .grid import Grid
from .homotopy import HomotopyProblem, build_particular, estimate_lambda0, newton_solve
from .hypersurface import graph_quantities
from .rhs import RightHandSide, clamp_rhs
from .scenario import Scenario

__all__ = [
    "AmbientManifold", "ContinuationTrace", "CurveSolveError", "CurvatureFunction", "Grid",
    "HomotopyProblem", "RightHandSide", "Scenario", "Schedule", "build_particular", "builtin",
    "clamp_rhs", "continue_path", "estimate_lambda0", "graph_quantities", "make_curvature",
    "newton_solve", "principal_curvatures", "warped",
]
