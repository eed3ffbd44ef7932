"""Numerical experiments on the solver's own output."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .ambient import AmbientManifold, strictly_convex_reference
from .errors import ConeViolation, CurveSolveError
from .grid import Grid
from .homotopy import HomotopyProblem, newton_solve
from .hypersurface import graph_quantities

log = logging.getLogger(__name__)

UNIQUENESS_TOL = 1e-8
FD_TOL = 1e-6


@dataclass
class DiagnosticReport:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    scenario: str = ""
    seed: int | None = None

    def text(self) -> str:
        lines = [f"[{self.name}]", f"status = {'PASS' if self.passed else 'FAIL'}"]
        if self.scenario:
            lines.append(f"scenario = {self.scenario}")
        if self.seed is not None:
            lines.append(f"seed = {self.seed}")
        lines.extend(f"{k} = {v!r}" for k, v in self.measured.items())
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        """JSON-ready form; non-finite numbers become None."""
        return {"name": self.name, "passed": bool(self.passed), "measured": _clean(self.measured),
                "scenario": self.scenario, "seed": self.seed}


def _clean(value):
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def smooth_noise(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    """Random combination of 8 fixed low modes, normalized to unit sup norm."""
    if grid.dim_n == 1:
        th = grid.theta
        modes = [f(k * th) for k in range(1, 5) for f in (np.cos, np.sin)]
    else:
        ph, th = grid.nodes[:, 0], grid.nodes[:, 1]
        x, y, z = np.sin(ph) * np.cos(th), np.sin(ph) * np.sin(th), np.cos(ph)
        modes = [x, y, z, x * y, x * z, y * z, x**2 - y**2, 3 * z**2 - 1]
    c = rng.normal(size=8)
    w = np.asarray(modes).T @ c
    return w / np.max(np.abs(w))


def random_start(problem: HomotopyProblem, rng: np.random.Generator) -> np.ndarray:
    """Admissible graph strictly between the barriers.

    A constant offset into the band plus smooth noise; the noise is halved
    until the graph is admissible and stays inside the band.
    """
    lo, hi = problem.u1, problem.u2
    s = rng.uniform(0.15, 0.85)
    base = lo + s * (hi - lo)
    amp = 0.25 * float(np.min(hi - lo)) * min(s, 1 - s)
    noise = smooth_noise(problem.grid, rng)
    for _ in range(12):
        u = base + amp * noise
        try:
            problem.F.value(problem.state(u).kappa)
            if np.all(u > lo) and np.all(u < hi):
                return u
        except CurveSolveError:
            pass
        amp *= 0.5
    return base


def uniqueness_experiment(problem: HomotopyProblem, trials: int = 20, seed: int = 0,
                          tol: float = 1e-11) -> DiagnosticReport:
    """Newton at t = 0 from random starts; every converged run must land on u0."""
    rng = np.random.default_rng(seed)
    distances, failures = [], 0
    for _ in range(trials):
        u = random_start(problem, rng)
        try:
            res = newton_solve(u, 0.0, problem, tol)
        except CurveSolveError as exc:
            log.info("uniqueness trial did not converge: %s", exc)
            failures += 1
            continue
        distances.append(float(np.max(np.abs(res.u - problem.u0))))
    converged = trials - failures
    ok = (converged >= 0.9 * trials) and all(d <= UNIQUENESS_TOL for d in distances)
    return DiagnosticReport("uniqueness", bool(ok or trials == 0), {
        "lambda": problem.lam, "trials": trials, "converged": converged,
        "max_distance": max(distances) if distances else 0.0}, seed=seed)


def coercivity_check(problem: HomotopyProblem, u=None, t: float = 0.0) -> DiagnosticReport:
    """Smallest real part of the Jacobian spectrum at ``(u0, 0)``."""
    u = problem.u0 if u is None else u
    J = problem.jacobian(u, t).toarray()
    mu = float(np.min(np.linalg.eigvals(J).real))
    return DiagnosticReport("coercivity", mu > 0, {
        "lambda": problem.lam, "mu_min": mu, "c_emp": problem.lam - mu})


@dataclass
class C2Monitor:
    w: np.ndarray
    defined: np.ndarray

    @property
    def max(self) -> float:
        return float(np.max(self.w[self.defined])) if self.defined.any() else np.nan

    @property
    def min(self) -> float:
        return float(np.min(self.w[self.defined])) if self.defined.any() else np.nan


def c2_monitor(u, m: AmbientManifold, grid: Grid, lambda_w: float = 1.0, mu_w: float = 1.0,
               chi=None) -> C2Monitor:
    """``w = log kappa_max + lambda_w log v + mu_w chi`` at every node.

    Nodes with a non-positive largest curvature are marked undefined.
    """
    chi = chi or strictly_convex_reference(m)
    s = graph_quantities(m, u, grid)
    top = s.kappa[:, -1]
    defined = top > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(defined, np.log(np.where(defined, top, 1.0)), np.nan)
    w = w + lambda_w * np.log(s.v) + mu_w * np.asarray(chi(s.u), dtype=float)
    return C2Monitor(w, defined)


def _fd_errors(problem, u, t, directions, eps, jacobian):
    J = jacobian(u, t)
    errs = []
    for eta in directions:
        fd = (problem.residual(u + eps * eta, t) - problem.residual(u - eps * eta, t)) / (2 * eps)
        errs.append(float(np.max(np.abs(J @ eta - fd)) / max(np.max(np.abs(fd)), 1e-300)))
    return errs


def jacobian_fd_check(u, t: float, problem: HomotopyProblem, seed: int = 0,
                      n_directions: int = 10, eps_values=(1e-4, 1e-6, 1e-8),
                      jacobian=None) -> DiagnosticReport:
    """Assembled Jacobian against central differences on random directions.

    Passes when the best step in ``eps_values`` gives a relative sup-norm
    error at most 1e-6 in every direction.  ``jacobian`` replaces the assembly
    (used for fault injection).
    """
    jacobian = jacobian or problem.jacobian
    rng = np.random.default_rng(seed)
    directions = [rng.normal(size=np.size(u)) for _ in range(n_directions)]
    sweep = {}
    for eps in eps_values:
        try:
            sweep[eps] = max(_fd_errors(problem, u, t, directions, eps, jacobian))
        except ConeViolation:
            sweep[eps] = np.inf
    best = min(sweep.values())
    return DiagnosticReport("jacobian_fd", best <= FD_TOL, {
        "t": t, "errors": {repr(k): v for k, v in sweep.items()}, "best": best}, seed=seed)
