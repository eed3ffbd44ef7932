"""Adaptive path following of the homotopy from t = 0 to t = 1.

Natural-parameter continuation with a tangent predictor is the default.  When
Newton keeps failing at the minimum step the tracker switches to
pseudo-arclength continuation in ``(u, t)`` with the weighted norm
``|u|^2 / N + t^2`` and returns to natural stepping once ``t`` moves past the
point where the trouble started.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (ConeViolation, DomainError, EllipticityError, MonitorError,
                     NonConvergence, PathError)
from .homotopy import HomotopyProblem, newton_solve

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("t", "dt", "iters", "residual", "monitor_min_barrier_gap",
                 "max_graddsq", "max_kappa", "u_checksum")

_SOLVER_ERRORS = (NonConvergence, ConeViolation, DomainError, EllipticityError)


@dataclass(frozen=True)
class Schedule:
    dt0: float = 0.1
    dt_min: float = 1e-4
    grow: float = 1.5
    grow_after: int = 2
    tol: float = 1e-10
    final_tol: float = 1e-10
    max_steps: int = 500
    overshoot: float = 1e-3
    ds0: float = 1e-2
    ds_min: float = 1e-7
    max_arclength_steps: int = 2000


def u_checksum(u) -> str:
    return hashlib.sha256(np.ascontiguousarray(u, dtype=np.float64).tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class TraceStep:
    t: float
    dt: float
    iters: int
    residual: float
    monitor_min_barrier_gap: float
    max_graddsq: float
    max_kappa: float
    u_checksum: str

    def row(self) -> str:
        return "\t".join(v if isinstance(v, str) else repr(v) for v in self.values())

    def values(self):
        return tuple(getattr(self, c) for c in TRACE_COLUMNS)


@dataclass
class ContinuationTrace:
    steps: list = field(default_factory=list)
    arclength: list = field(default_factory=list)
    newton_constants: list = field(default_factory=list)

    def table(self) -> str:
        return "\t".join(TRACE_COLUMNS) + "\n" + "".join(s.row() + "\n" for s in self.steps)

    def to_dict(self) -> dict:
        return {"steps": [asdict(s) for s in self.steps],
                "arclength": [asdict(s) for s in self.arclength],
                "newton_constants": list(self.newton_constants)}

    @classmethod
    def from_dict(cls, d: dict) -> "ContinuationTrace":
        return cls([TraceStep(**s) for s in d.get("steps", [])],
                   [TraceStep(**s) for s in d.get("arclength", [])],
                   list(d.get("newton_constants", [])))

    def checksum(self) -> str:
        return hashlib.sha256(self.table().encode()).hexdigest()

    @property
    def final_t(self) -> float | None:
        return self.steps[-1].t if self.steps else None


@dataclass
class PathState:
    """Everything the tracker needs to continue from an accepted natural step."""

    u: np.ndarray
    t: float
    dt: float
    streak: int
    trace: ContinuationTrace


def check_monitors(problem: HomotopyProblem, u, t=None):
    """Evaluate the three a priori bounds at ``u``; raise MonitorError on a breach.

    Returns ``(min barrier gap, max |Du|^2, max kappa)``.
    """
    s = problem.state(u)
    gap = float(min(np.min(s.u - problem.u1), np.min(problem.u2 - s.u)))
    grad = float(np.max(s.grad_sq))
    kmax = float(np.max(s.kappa))
    where = "" if t is None else f" at t={t:.6g}"
    if not gap > 0:
        raise MonitorError(f"barrier sandwich u1 < u < u2 violated{where} (gap {gap:.3e})",
                           bound="barrier", value=gap)
    if not grad < problem.grad_cap:
        raise MonitorError(f"gradient bound |Du|^2 < {problem.grad_cap:.6g} violated{where} "
                           f"(max {grad:.6g})", bound="gradient", value=grad)
    if not kmax < problem.kappa_cap:
        raise MonitorError(f"curvature bound kappa < {problem.kappa_cap:.6g} violated{where} "
                           f"(max {kmax:.6g})", bound="curvature", value=kmax)
    return gap, grad, kmax


def _record(problem, u, t, dt, res) -> TraceStep:
    gap, grad, kmax = check_monitors(problem, u, t)
    return TraceStep(float(t), float(dt), int(res.iterations), float(res.residual), gap, grad,
                     kmax, u_checksum(u))


def _tangent(problem: HomotopyProblem, u, t):
    """``du/dt = -J^-1 dG/dt`` along the natural parametrization."""
    J = problem.jacobian(u, t)
    return spla.spsolve(sp.csc_matrix(J), -problem.dresidual_dt(u, t))


def initial_state(problem: HomotopyProblem, schedule: Schedule) -> PathState:
    res = newton_solve(problem.u0, 0.0, problem, schedule.tol)
    trace = ContinuationTrace()
    trace.steps.append(_record(problem, res.u, 0.0, 0.0, res))
    return PathState(res.u, 0.0, schedule.dt0, 0, trace)


def continue_path(problem: HomotopyProblem, schedule: Schedule | None = None,
                  state: PathState | None = None, on_step=None):
    """Follow the path to t = 1; returns ``(u_final, trace)``.

    ``state`` resumes from a checkpointed accepted step; ``on_step(state)`` is
    called after every accepted natural step (used for checkpointing).
    """
    schedule = schedule or Schedule()
    if state is None:
        state = initial_state(problem, schedule)
        if on_step:
            on_step(state)
    u, t, dt, streak, trace = state.u, state.t, state.dt, state.streak, state.trace
    n_steps = len(trace.steps)
    while t < 1.0:
        if n_steps > schedule.max_steps:
            raise PathError(f"step budget {schedule.max_steps} exhausted at t={t:.6g}")
        t_new = min(1.0, t + dt)
        h = t_new - t
        try:
            pred = u + h * _tangent(problem, u, t)
            res = newton_solve(pred, t_new, problem, schedule.tol)
        except _SOLVER_ERRORS + (RuntimeError,) as exc:
            log.info("step t=%.6g -> %.6g failed (%s); halving", t, t_new, exc)
            dt = 0.5 * dt
            streak = 0
            if dt < schedule.dt_min:
                log.warning("minimum step reached at t=%.6g; switching to pseudo-arclength", t)
                u, t, res = _arclength(problem, schedule, u, t, trace)
                dt, streak = schedule.dt_min, 0
                trace.steps.append(_record(problem, u, t, t - trace.steps[-1].t, res))
                n_steps += 1
            continue
        const = res.quadratic_constant()
        if const is not None:
            trace.newton_constants.append(const)
        trace.steps.append(_record(problem, res.u, t_new, h, res))
        n_steps += 1
        u, t = res.u, t_new
        streak += 1
        if streak >= schedule.grow_after:
            dt *= schedule.grow
            streak = 0
        log.info("accepted t=%.6g dt=%.3g iters=%d residual=%.2e", t, h, res.iterations,
                 res.residual)
        if on_step:
            on_step(PathState(u, t, dt, streak, trace))
    # final polish at t = 1
    res = newton_solve(u, 1.0, problem, schedule.final_tol)
    if res.iterations:
        trace.steps[-1] = _record(problem, res.u, 1.0, trace.steps[-1].dt, res)
    return res.u, trace


def _weighted(problem, du, dt_):
    n = du.size
    return float(np.sqrt(du @ du / n + dt_ * dt_))


def _bordered(J, Gt, tu, tt, n):
    top = sp.hstack([J, sp.csc_matrix(Gt[:, None])])
    bottom = sp.csc_matrix(np.append(tu / n, tt)[None, :])
    return sp.csc_matrix(sp.vstack([top, bottom]))


def _arclength(problem: HomotopyProblem, schedule: Schedule, u, t, trace: ContinuationTrace):
    """Pseudo-arclength tracking until t increases past the fold point."""
    n = u.size
    t_fold = t
    tu = _tangent(problem, u, t)
    tt = 1.0
    nrm = _weighted(problem, tu, tt)
    tu, tt = tu / nrm, tt / nrm
    ds = schedule.ds0
    streak = 0
    for _ in range(schedule.max_arclength_steps):
        try:
            zu, zt, res = _arclength_corrector(problem, schedule, u, t, tu, tt, ds)
        except _SOLVER_ERRORS + (RuntimeError,) as exc:
            ds *= 0.5
            streak = 0
            if ds < schedule.ds_min:
                raise PathError(f"pseudo-arclength step exhausted near t={t:.6g}: {exc}") from None
            continue
        if zt < -schedule.overshoot or zt > 1.0 + schedule.overshoot:
            if zt > 1.0:
                res = newton_solve(zu, 1.0, problem, schedule.tol)
                return res.u, 1.0, res
            raise PathError(f"path left the parameter range at t={zt:.6g}")
        # new tangent, oriented like the old one
        J = problem.jacobian(zu, zt)
        Gt = problem.dresidual_dt(zu, zt)
        A = _bordered(J, Gt, tu, tt, n)
        z = spla.spsolve(A, np.append(np.zeros(n), 1.0))
        nrm = _weighted(problem, z[:n], z[n])
        tu, tt = z[:n] / nrm, z[n] / nrm
        u, t = zu, zt
        trace.arclength.append(_record(problem, u, t, ds, res))
        streak += 1
        if streak >= 2:
            ds *= schedule.grow
            streak = 0
        if t > t_fold and tt > 0:
            return u, t, res
    raise PathError(f"pseudo-arclength budget exhausted at t={t:.6g}")


@dataclass
class _BorderedResult:
    iterations: int
    residual: float


def _arclength_corrector(problem, schedule, u0, t0, tu, tt, ds, max_iter=30):
    n = u0.size
    u, t = u0 + ds * tu, t0 + ds * tt

    def system(u, t):
        G = problem.residual(u, t)
        N = tu @ (u - u0) / n + tt * (t - t0) - ds
        return G, N

    G, N = system(u, t)
    r = max(float(np.max(np.abs(G))), abs(N))
    for it in range(max_iter):
        if r <= schedule.tol:
            return u, t, _BorderedResult(it, r)
        A = _bordered(problem.jacobian(u, t), problem.dresidual_dt(u, t), tu, tt, n)
        d = spla.spsolve(A, -np.append(G, N))
        if not np.all(np.isfinite(d)):
            raise NonConvergence("singular bordered system", r, it)
        alpha = 1.0
        for _ in range(31):
            uc, tc = u + alpha * d[:n], t + alpha * d[n]
            try:
                Gc, Nc = system(uc, tc)
            except (ConeViolation, DomainError):
                alpha *= 0.5
                continue
            rc = max(float(np.max(np.abs(Gc))), abs(Nc))
            if rc < (1.0 - 1e-4 * alpha) * r:
                break
            alpha *= 0.5
        else:
            raise NonConvergence("bordered damping exhausted", r, it)
        u, t, G, N, r = uc, tc, Gc, Nc, rc
    if r <= schedule.tol:
        return u, t, _BorderedResult(max_iter, r)
    raise NonConvergence("bordered Newton did not converge", r, max_iter)
