"""Barrier pair validation and the monitor constants derived from it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ambient import AmbientManifold
from .curvature import CurvatureFunction
from .errors import BarrierError, OrderingError
from .grid import Grid
from .hypersurface import admissibility, graph_quantities
from .rhs import RightHandSide

DEFAULT_SLACK = 1e-8


@dataclass
class BarrierReport:
    """Per-node gaps ``F - f`` on the upper barrier and ``f - eps1 - F`` on Sigma."""

    upper_gap: np.ndarray
    lower_gap: np.ndarray
    sigma_nodes: np.ndarray
    node_count: int
    passed: bool = True

    @property
    def upper_margin(self) -> float:
        return float(np.min(self.upper_gap))

    @property
    def lower_margin(self) -> float:
        """``+inf`` when Sigma is empty."""
        return float(np.min(self.lower_gap)) if self.lower_gap.size else np.inf

    def summary(self) -> str:
        lines = [f"upper barrier: min(F - f) = {self.upper_margin:.6g}",
                 f"lower barrier: min(f - eps1 - F) = {self.lower_margin:.6g} "
                 f"over {self.sigma_nodes.size}/{self.node_count} admissible nodes"]
        if self.sigma_nodes.size < self.node_count:
            lines.append("note: inadmissible lower-barrier nodes excluded from Sigma")
        return "\n".join(lines)


@dataclass
class BarrierPair:
    u1: np.ndarray
    u2: np.ndarray
    epsilon1: float
    report: BarrierReport | None = None

    def __post_init__(self):
        self.u1 = np.asarray(self.u1, dtype=float)
        self.u2 = np.asarray(self.u2, dtype=float)
        if self.epsilon1 <= 0:
            raise BarrierError("epsilon1 must be positive")


def validate(pair: BarrierPair, m: AmbientManifold, grid: Grid, F: CurvatureFunction,
             f: RightHandSide, slack: float = DEFAULT_SLACK) -> BarrierReport:
    """Check ``F > f`` on the upper barrier and ``F <= f - eps1`` on Sigma.

    Sigma is the set of lower-barrier nodes whose curvatures lie in the cone.
    Both inequalities are checked with an absolute ``slack``.
    """
    order = pair.u2 - pair.u1
    if np.any(order <= 0):
        a = int(np.argmin(order))
        raise OrderingError(f"barriers out of order: u1={pair.u1[a]:.6g} >= u2={pair.u2[a]:.6g} "
                            f"at node {a}", node=a, margin=float(order[a]))
    m.check_chart(pair.u1, grid.nodes)
    m.check_chart(pair.u2, grid.nodes)

    s2 = graph_quantities(m, pair.u2, grid)
    adm2 = admissibility(s2, F)
    if not adm2.admissible:
        a = adm2.violating_nodes[0]
        raise BarrierError(f"upper barrier is not admissible at node {a}", node=a,
                           margin=float(adm2.margins[a]))
    up = F.value(s2.kappa) - np.real(f(s2.u, grid.nodes, s2.nu))
    if np.any(up <= -slack):
        a = int(np.argmin(up))
        raise BarrierError(f"upper barrier fails F > f at node {a} (F - f = {up[a]:.6g})",
                           node=a, margin=float(up[a]))

    s1 = graph_quantities(m, pair.u1, grid)
    sigma = np.flatnonzero(admissibility(s1, F).margins > 0)
    k = s1.kappa[sigma]
    low = (np.real(f(s1.u, grid.nodes, s1.nu))[sigma] - pair.epsilon1
           - (F.value(k) if sigma.size else np.zeros(0)))
    if np.any(low < -slack):
        j = int(np.argmin(low))
        a = int(sigma[j])
        raise BarrierError(f"lower barrier fails F <= f - eps1 at node {a} "
                           f"(f - eps1 - F = {low[j]:.6g})", node=a, margin=float(low[j]))
    pair.report = BarrierReport(up, low, sigma, grid.size)
    return pair.report


def monitor_caps(m: AmbientManifold, grid: Grid, u1, u2):
    """Gradient cap ``4 (max |Du|^2 over both barriers + 1)`` and curvature cap.

    The curvature cap is ten times the largest absolute barrier curvature
    (ten when both barriers are totally geodesic).
    """
    s1 = graph_quantities(m, u1, grid)
    s2 = graph_quantities(m, u2, grid)
    grad = max(float(np.max(s1.grad_sq)), float(np.max(s2.grad_sq)))
    kmax = max(float(np.max(np.abs(s1.kappa))), float(np.max(np.abs(s2.kappa))))
    return 4.0 * (grad + 1.0), 10.0 * kmax if kmax > 0 else 10.0
