"""The homotopy problem: particular solution, residual, Jacobian and Newton.

The equation at parameter ``t`` is

    G(u; t) = F(kappa(u)) - (t f(u, x, nu(u)) + (1 - t) f0(u, x)) = 0,
    f0(x0, x) = F0(x) + lam (u0(x) - x0),

where ``u0 = phi(tau0, .)`` is a level graph of the upper barrier and ``F0``
its curvature, so that ``u0`` solves the ``t = 0`` problem exactly on the grid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ambient import AmbientManifold
from .curvature import CurvatureFunction, form_derivatives, principal_curvatures
from .errors import (ConeViolation, ConfigurationError, DomainError, EllipticityError,
                     NonConvergence, ParticularSolutionError)
from .grid import Grid
from .hypersurface import GraphState, ambient_samples, graph_quantities, pointwise_geometry
from .rhs import RightHandSide
from .tubular import LevelFoliation

log = logging.getLogger(__name__)

CSTEP = 1e-30
NOISE_FLOOR = 1e-10
LAMBDA_SEQUENCE = tuple(8.0 * 2**k for k in range(14))  # 8 ... 2^16


@dataclass
class HomotopyProblem:
    ambient: AmbientManifold
    grid: Grid
    F: CurvatureFunction
    rhs: RightHandSide
    u1: np.ndarray
    u2: np.ndarray
    eps1: float
    lam: float
    u0: np.ndarray
    F0: np.ndarray
    tau0: float | None = None
    grad_cap: float = np.inf
    kappa_cap: float = np.inf

    def with_lambda(self, lam: float) -> "HomotopyProblem":
        """Same u0 / F0 with a different penalty (tau0 is not re-selected)."""
        return replace(self, lam=float(lam))

    # -- pieces of the residual -------------------------------------------
    def f0(self, x0):
        return self.F0 + self.lam * (self.u0 - x0)

    def state(self, u) -> GraphState:
        return graph_quantities(self.ambient, u, self.grid)

    def f_on(self, s: GraphState):
        return np.real(self.rhs(s.u, self.grid.nodes, s.nu))

    def residual_parts(self, u):
        """``(F(kappa(u)), f(u, x, nu), f0(u))``; raises ConeViolation off the cone."""
        s = self.state(u)
        try:
            Fv = self.F.value(s.kappa)
        except ConeViolation as exc:
            raise ConeViolation(f"inadmissible graph: {exc}", nodes=exc.nodes,
                                points=exc.points) from None
        return Fv, self.f_on(s), self.f0(s.u)

    def residual(self, u, t: float):
        Fv, f, f0 = self.residual_parts(u)
        return Fv - (t * f + (1.0 - t) * f0)

    def dresidual_dt(self, u, t: float = 0.0):
        _, f, f0 = self.residual_parts(u)
        return f0 - f

    def linearize(self, u, t: float) -> "LinearizedOperator":
        return linearize(u, t, self)

    def jacobian(self, u, t: float):
        return linearize(u, t, self).matrix


def residual(u, t, problem: HomotopyProblem):
    return problem.residual(u, t)


@dataclass
class LinearizedOperator:
    """Discrete Jacobian ``-a^ij D_ij + b^i D_i + c`` of the residual.

    ``a`` is per node ``(n, n)``, ``b`` per node ``(n,)``, ``c`` per node.
    """

    matrix: sp.csr_matrix
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def apply(self, eta):
        return self.matrix @ eta


def _pointwise_residual(problem: HomotopyProblem, t, u, p, q, F_dh, F_dg):
    """Linear part (in the complex perturbation) of the pointwise residual."""
    g, h, v, nu = pointwise_geometry(problem.ambient, problem.grid, u, p, q)
    f = problem.rhs(u, problem.grid.nodes, nu)
    dF = np.einsum("nij,nij->n", F_dh, np.imag(h)) + np.einsum("nij,nij->n", F_dg, np.imag(g))
    return (dF - t * np.imag(f)) / CSTEP


def linearize(u, t: float, problem: HomotopyProblem) -> LinearizedOperator:
    """Assemble the Jacobian of the residual in ``u``.

    The residual at a node depends on ``u``, the stencil gradient ``p`` and
    stencil Hessian ``q`` there.  ``dF/dh`` and ``dF/dg`` come from the
    spectral chain rule; the partials of ``h``, ``g`` and ``f`` in
    ``(u, p, q)`` are complex-step derivatives of the pointwise geometry,
    exact to roundoff.  The penalty contributes ``(1 - t) lam`` to ``c``.
    """
    grid = problem.grid
    n = grid.dim_n
    u = np.asarray(u, dtype=float)
    s = problem.state(u)
    problem.F.value(s.kappa)  # cone check
    F_dh, F_dg = form_derivatives(problem.F, s.principal)
    p, q = s.p, s.q
    ops = grid.derivative_operators()

    c = _pointwise_residual(problem, t, u + 1j * CSTEP, p.astype(complex), q.astype(complex),
                            F_dh, F_dg) + (1.0 - t) * problem.lam
    b = np.empty((grid.size, n))
    for k in range(n):
        pc = p.astype(complex)
        pc[:, k] += 1j * CSTEP
        b[:, k] = _pointwise_residual(problem, t, u.astype(complex), pc, q.astype(complex),
                                      F_dh, F_dg)
    a = np.empty((grid.size, n, n))
    coef = {}
    for k in range(n):
        for l in range(k, n):
            qc = q.astype(complex)
            qc[:, k, l] += 1j * CSTEP
            if k != l:
                qc[:, l, k] += 1j * CSTEP
            d = _pointwise_residual(problem, t, u.astype(complex), p.astype(complex), qc,
                                    F_dh, F_dg)
            coef[(k, l)] = d
            a[:, k, l] = -d if k == l else -0.5 * d
            a[:, l, k] = a[:, k, l]
    if n == 1:
        lam_min = a[:, 0, 0]
    else:
        lam_min = np.linalg.eigvalsh(a)[:, 0]
    if np.any(lam_min <= 0):
        bad = int(np.argmin(lam_min))
        raise EllipticityError(f"a^ij not positive definite at node {bad} (min eig {lam_min[bad]:.3e})")
    M = sp.diags(c)
    for k in range(n):
        M = M + sp.diags(b[:, k]) @ ops[(k,)]
        for l in range(k, n):
            M = M + sp.diags(coef[(k, l)]) @ ops[(k, l)]
    return LinearizedOperator(M.tocsr(), a, b, c)


# -- Newton ------------------------------------------------------------------


@dataclass
class NewtonResult:
    u: np.ndarray
    iterations: int
    residual: float
    history: list = field(default_factory=list)

    def quadratic_constant(self) -> float | None:
        """max r_{k+1} / r_k^2 over the last three residuals above the noise floor.

        Residuals below ``NOISE_FLOOR`` are roundoff, not Newton contraction,
        and would make the ratio meaningless.
        """
        tail = [r for r in self.history if r > NOISE_FLOOR][-3:]
        if len(tail) < 2:
            return None
        return max(tail[i + 1] / tail[i] ** 2 for i in range(len(tail) - 1))


def _sup(x) -> float:
    return float(np.max(np.abs(x)))


def newton_solve(u_init, t: float, problem, tol: float, max_iter: int = 50,
                 max_halvings: int = 30) -> NewtonResult:
    """Damped Newton with backtracking on the sup norm of the residual.

    A candidate is rejected (and the step halved) when it leaves the chart or
    the cone of the curvature function.  ``problem`` needs ``residual`` and
    ``jacobian``; it is usually a :class:`HomotopyProblem`.
    """
    u = np.array(u_init, dtype=float)
    G = problem.residual(u, t)
    r = _sup(G)
    history = [r]
    for it in range(max_iter + 1):
        if r <= tol:
            return NewtonResult(u, it, r, history)
        if it == max_iter:
            break
        J = problem.jacobian(u, t)
        try:
            delta = spla.spsolve(sp.csc_matrix(J), -G)
        except RuntimeError as exc:  # singular factorization
            raise NonConvergence(f"singular Jacobian: {exc}", r, it) from None
        if not np.all(np.isfinite(delta)):
            raise NonConvergence("singular Jacobian", r, it)
        alpha = 1.0
        for _ in range(max_halvings + 1):
            cand = u + alpha * delta
            try:
                Gc = problem.residual(cand, t)
            except (ConeViolation, DomainError):
                alpha *= 0.5
                continue
            rc = _sup(Gc)
            if np.isfinite(rc) and rc < (1.0 - 1e-4 * alpha) * r:
                break
            alpha *= 0.5
        else:
            raise NonConvergence(f"damping exhausted at residual {r:.3e}", r, it)
        u, G, r = cand, Gc, rc
        history.append(r)
        log.debug("newton t=%.6g it=%d alpha=%.3g residual=%.3e", t, it + 1, alpha, r)
    raise NonConvergence(f"no convergence in {max_iter} iterations (residual {r:.3e})",
                         r, max_iter)


# -- the particular problem ----------------------------------------------------


def sandwich_ok(F_tau0, F_top, phi_tau0, phi_top, lam) -> np.ndarray:
    """Nodal check of 1/2 F(tau0) <= F(tau0) + lam (phi(tau0) - phi(0)) <= F(0)."""
    mid = F_tau0 + lam * (phi_tau0 - phi_top)
    return (0.5 * F_tau0 <= mid) & (mid <= F_top)


def build_particular(fol: LevelFoliation, F: CurvatureFunction, f: RightHandSide, lam: float,
                     u1=None, tau0: float | None = None, max_trials: int = 40):
    """Choose tau0 and return ``(u0, F0, tau0)``.

    ``F0`` is the nodal curvature function of ``u0 = phi(tau0, .)``, so that
    ``f0(x0, x) = F0 + lam (u0 - x0)``.  Trials are ``tau0 = -eps0 / 2^k``;
    the first one satisfying the sandwich at every node (and staying above
    the lower barrier) is taken.  An explicit ``tau0`` is checked, not searched.
    """
    if lam <= 0:
        raise ConfigurationError("lambda must be positive")
    m, grid = fol.ambient, fol.grid
    top = graph_quantities(m, fol.level(0.0)[0], grid)
    F_top = F.value(top.kappa)
    trials = [tau0] if tau0 is not None else [-fol.eps0 * 0.5**k for k in range(1, max_trials + 1)]
    for trial in trials:
        phi, _ = fol.level(trial)
        if u1 is not None and np.any(phi <= u1):
            continue
        s = graph_quantities(m, phi, grid)
        try:
            F_t = F.value(s.kappa)
        except ConeViolation:
            continue
        if np.all(sandwich_ok(F_t, F_top, phi, top.u, lam)):
            log.info("particular solution: tau0=%.6g, lambda=%g", trial, lam)
            return phi, F_t, float(trial)
    raise ParticularSolutionError(
        f"no tau0 in (-eps0, 0) satisfies the sandwich condition for lambda={lam}")


def make_problem(fol: LevelFoliation, F: CurvatureFunction, f: RightHandSide, u1, eps1: float,
                 lam: float, tau0: float | None = None, grad_cap=np.inf,
                 kappa_cap=np.inf) -> HomotopyProblem:
    u0, F0, tau0 = build_particular(fol, F, f, lam, u1=u1, tau0=tau0)
    return HomotopyProblem(fol.ambient, fol.grid, F, f, np.asarray(u1, dtype=float),
                           fol.level(0.0)[0], eps1, float(lam), u0, F0, tau0,
                           grad_cap, kappa_cap)


def smallest_eigenvalue(problem: HomotopyProblem, u=None, t: float = 0.0) -> float:
    """Smallest real part of the spectrum of the assembled Jacobian."""
    u = problem.u0 if u is None else u
    J = problem.jacobian(u, t).toarray()
    return float(np.min(np.linalg.eigvals(J).real))


def estimate_lambda0(factory, trials: int = 20, seed: int = 0,
                     sequence=LAMBDA_SEQUENCE):
    """Smallest lambda in the doubling sequence 8, 16, ... that passes both checks.

    ``factory(lam)`` returns a :class:`HomotopyProblem` (or raises
    ParticularSolutionError).  A value is accepted when the Jacobian at
    ``(u0, 0)`` has spectrum in the right half plane and the uniqueness
    experiment passes.  Returns ``(lam0, problem, uniqueness report)``.
    """
    from .diagnostics import uniqueness_experiment

    for lam in sequence:
        try:
            problem = factory(lam)
        except ParticularSolutionError as exc:
            log.info("lambda=%g rejected: %s", lam, exc)
            continue
        try:
            mu = smallest_eigenvalue(problem)
        except EllipticityError as exc:
            log.info("lambda=%g rejected: %s", lam, exc)
            continue
        if mu <= 0:
            log.info("lambda=%g rejected: smallest eigenvalue %.3e", lam, mu)
            continue
        rep = uniqueness_experiment(problem, trials, seed)
        if rep.passed:
            return float(lam), problem, rep
        log.info("lambda=%g rejected: uniqueness experiment failed", lam)
    raise ConfigurationError(f"no admissible lambda up to {sequence[-1]:g}")
