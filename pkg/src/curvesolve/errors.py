"""Exception hierarchy.

The CLI maps these onto exit codes, so every failure mode that a run can hit
has its own class here.
"""
from __future__ import annotations


class CurveSolveError(Exception):
    """Base class for all solver errors."""


class DomainError(CurveSolveError):
    """A point lies outside the ambient coordinate chart."""


class MetricError(CurveSolveError):
    """A bilinear form that must be positive definite is not."""


class ConeViolation(CurveSolveError):
    """Principal curvatures left the defining cone of the curvature function."""

    def __init__(self, message: str, nodes=None, points=None):
        super().__init__(message)
        self.nodes = [] if nodes is None else list(nodes)
        self.points = points


class IllConditioned(CurveSolveError):
    """Gradient requested at (or numerically on) the cone boundary."""


class UnsupportedError(CurveSolveError):
    """Requested feature is not available for this ambient / configuration."""


class ConfigurationError(CurveSolveError):
    """Inconsistent or out-of-range configuration values."""


class ScenarioParseError(ConfigurationError):
    """Scenario file could not be parsed."""


class FoliationError(CurveSolveError):
    def __init__(self, message: str, tau: float | None = None):
        super().__init__(message)
        self.tau = tau


class BarrierError(CurveSolveError):
    """Barrier inequalities fail."""

    def __init__(self, message: str, node: int | None = None, margin: float | None = None):
        super().__init__(message)
        self.node = node
        self.margin = margin


class OrderingError(BarrierError):
    """Lower barrier is not strictly below the upper barrier."""


class RhsBoundsError(BarrierError):
    """Sampled values of f leave the declared band [c1, c2] between the barriers."""


class ParticularSolutionError(CurveSolveError):
    """No offset tau0 satisfies the sandwich condition."""


class EllipticityError(CurveSolveError):
    """The linearized operator lost ellipticity."""


class NonConvergence(CurveSolveError):
    def __init__(self, message: str, residual: float | None = None, iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class MonitorError(CurveSolveError):
    """An a priori bound was breached along the continuation path."""

    def __init__(self, message: str, bound: str, value: float | None = None):
        super().__init__(message)
        self.bound = bound
        self.value = value


class PathError(CurveSolveError):
    """Continuation could not reach t = 1."""
