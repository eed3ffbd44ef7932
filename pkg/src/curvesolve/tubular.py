"""Level hypersurfaces of the upper barrier at signed distance tau <= 0.

Each level ``M(tau)`` is obtained by following the inward normal geodesics of
the barrier for arclength ``|tau|`` and is returned as a graph
``x0 = phi(tau, x)`` over the same grid.  Resampling onto the grid nodes is
done by shooting: for every node ``x`` we solve for the foot point ``y`` on
the barrier whose normal geodesic lands above ``x``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import ambient as amb
from . import kernels
from .ambient import AmbientManifold
from .errors import CurveSolveError, FoliationError
from .expressions import Expression
from .grid import Grid

log = logging.getLogger(__name__)

RK4_STEPS = 64
SHOOT_TOL = 1e-13
SHOOT_MAXITER = 60
MAX_HALVINGS = 6


# -- graph functions evaluable off the grid ------------------------------------


class GraphFunction:
    """A graph function over S0 with values and gradient at arbitrary points."""

    dim_n: int

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def nodal(self, grid: Grid) -> np.ndarray:
        return np.asarray(self(grid.nodes), dtype=float)


class ExpressionGraph(GraphFunction):
    def __init__(self, text: str, dim_n: int):
        self.text = str(text)
        self.dim_n = dim_n
        self._names = amb.angle_names(dim_n)
        self._e = Expression(self.text, self._names)
        self._d = [self._e.derivative(a) for a in self._names]

    def _kw(self, x):
        x = np.asarray(x)
        return {a: x[..., i] for i, a in enumerate(self._names)}

    def __call__(self, x):
        return self._e(**self._kw(x))

    def gradient(self, x):
        kw = self._kw(x)
        return np.stack([d(**kw) for d in self._d], axis=-1)

    def __repr__(self):
        return f"ExpressionGraph({self.text!r})"


class FourierGraph(GraphFunction):
    """Trigonometric interpolant of nodal data on a periodic n = 1 grid."""

    def __init__(self, values, grid: Grid):
        if grid.dim_n != 1:
            raise FoliationError("nodal barriers are only supported for n = 1; use an expression")
        self.dim_n = 1
        values = np.asarray(values, dtype=float)
        n = values.size
        self._c = np.fft.fft(values) / n
        k = np.fft.fftfreq(n, d=1.0 / n)
        if n % 2 == 0:
            # split the Nyquist mode symmetrically so the interpolant is real
            self._c = np.append(self._c, self._c[n // 2] / 2)
            self._c[n // 2] /= 2
            k = np.append(k, n // 2)
            k[n // 2] = -n // 2
        self._k = k

    def __call__(self, x):
        th = np.asarray(x)[..., 0]
        return np.real(np.exp(1j * th[..., None] * self._k) @ self._c)

    def gradient(self, x):
        th = np.asarray(x)[..., 0]
        return np.real(np.exp(1j * th[..., None] * self._k) @ (1j * self._k * self._c))[..., None]


def as_graph_function(u2, grid: Grid) -> GraphFunction:
    if isinstance(u2, GraphFunction):
        return u2
    if isinstance(u2, str):
        return ExpressionGraph(u2, grid.dim_n)
    return FourierGraph(u2, grid)


# -- geodesics -------------------------------------------------------------------


def graph_normal(m: AmbientManifold, surf: GraphFunction, y):
    """Foot points ``(u(y), y)`` and unit normals (contravariant) of a graph."""
    u = np.asarray(surf(y), dtype=float)
    du = surf.gradient(y)
    sigma, _, _ = amb.slice_metric(m, u, y)
    psi, _, _ = m.conformal(u, y)
    up = np.linalg.solve(sigma, du[..., None])[..., 0]
    v = np.sqrt(1.0 + np.einsum("...i,...i->...", up, du))
    scale = 1.0 / (v * np.exp(psi))
    nu = np.concatenate([scale[..., None], -up * scale[..., None]], axis=-1)
    X = np.concatenate([u[..., None], np.asarray(y, dtype=float)], axis=-1)
    return X, nu


def geodesic_flow(m: AmbientManifold, X, W, length: float, steps: int = RK4_STEPS):
    """Classical RK4 for ``x'' = -Gamma(x', x')`` over arclength ``length``."""
    if m.psi is None:
        x, w = kernels.geodesic_rk4(X, W, length, steps, m.kind, m.warp.f, m.warp.df)
        m.check_chart(x[..., 0], x[..., 1:])
        return x, w

    def rhs(x, w):
        G = amb.ambient_christoffels(m, x[..., 0], x[..., 1:])
        return w, -np.einsum("...abc,...b,...c->...a", G, w, w)

    hstep = length / steps
    x, w = np.array(X, dtype=float), np.array(W, dtype=float)
    for _ in range(steps):
        k1x, k1w = rhs(x, w)
        k2x, k2w = rhs(x + 0.5 * hstep * k1x, w + 0.5 * hstep * k1w)
        k3x, k3w = rhs(x + 0.5 * hstep * k2x, w + 0.5 * hstep * k2w)
        k4x, k4w = rhs(x + hstep * k3x, w + hstep * k3w)
        x = x + hstep / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        w = w + hstep / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
    return x, w


def _wrap_angles(d, dim_n):
    d = np.array(d, dtype=float)
    d[..., -1] = (d[..., -1] + np.pi) % (2.0 * np.pi) - np.pi
    return d


def _flow_from(m, surf, y, tau):
    X, nu = graph_normal(m, surf, y)
    if tau == 0.0:
        return X, nu
    # tau < 0: move against the normal; the returned velocity is d/dtau = -d/ds
    x, w = geodesic_flow(m, X, -nu, -tau)
    return x, -w


@dataclass
class LevelFoliation:
    """Graphs ``phi(tau, .)`` of the parallel hypersurfaces of the upper barrier."""

    ambient: AmbientManifold
    grid: Grid
    barrier: GraphFunction
    eps0: float
    taus: np.ndarray
    phi: np.ndarray
    phi_dot: np.ndarray
    _levels: dict = field(default_factory=dict, repr=False)

    @property
    def u2(self) -> np.ndarray:
        return self.phi[-1]

    def level(self, tau: float):
        """``(phi(tau, .), phi_dot(tau, .))`` at nodes; computed on demand."""
        tau = float(tau)
        if not -self.eps0 - 1e-15 <= tau <= 0.0:
            raise FoliationError(f"tau={tau} outside [-eps0, 0] with eps0={self.eps0}", tau=tau)
        if tau not in self._levels:
            self._levels[tau] = _compute_level(self.ambient, self.grid, self.barrier, tau)
        return self._levels[tau]

    def table(self) -> str:
        lines = ["tau\tnode\tphi"]
        for t, row in zip(self.taus, self.phi):
            lines.extend(f"{t!r}\t{a}\t{float(val)!r}" for a, val in enumerate(row))
        return "\n".join(lines) + "\n"


def _footprint_jacobian(m, surf, y, tau, delta=1e-6):
    n = y.shape[-1]
    J = np.empty(y.shape[:-1] + (n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = delta
        xp, _ = _flow_from(m, surf, y + e, tau)
        xm, _ = _flow_from(m, surf, y - e, tau)
        J[..., :, k] = _wrap_angles(xp[..., 1:] - xm[..., 1:], n) / (2 * delta)
    return J


def _compute_level(m: AmbientManifold, grid: Grid, surf: GraphFunction, tau: float):
    x = grid.nodes
    n = grid.dim_n
    if tau == 0.0:
        X, nu = graph_normal(m, surf, x)
        psi, _, _ = m.conformal(X[:, 0], x)
        return X[:, 0].copy(), 1.0 / (np.exp(2 * psi) * nu[:, 0])
    try:
        jac = _footprint_jacobian(m, surf, x, tau)
        det = jac[:, 0, 0] if n == 1 else np.linalg.det(jac)
        if np.any(det <= 0):
            raise FoliationError(
                f"normal geodesics cross before |tau|={-tau:.4g} (focal point reached; "
                f"min footprint Jacobian {det.min():.3g})", tau=tau)
        y = x.copy()
        for _ in range(SHOOT_MAXITER):
            end, w = _flow_from(m, surf, y, tau)
            miss = _wrap_angles(x - end[:, 1:], n)
            if np.max(np.abs(miss)) < SHOOT_TOL:
                break
            y = y + np.linalg.solve(jac, miss[..., None])[..., 0] if n == 2 else y + miss / jac[:, 0]
        else:
            raise FoliationError(f"level tau={tau:.4g} is not a graph over the grid", tau=tau)
    except FoliationError:
        raise
    except (CurveSolveError, np.linalg.LinAlgError, FloatingPointError) as exc:
        raise FoliationError(f"geodesic flow failed at tau={tau:.4g}: {exc}", tau=tau) from None
    psi, _, _ = m.conformal(end[:, 0], end[:, 1:])
    phi_dot = 1.0 / (np.exp(2 * psi) * w[:, 0])
    if np.any(~np.isfinite(phi_dot)) or np.any(phi_dot <= 0):
        raise FoliationError(f"phi_dot not positive at tau={tau:.4g}", tau=tau)
    return end[:, 0].copy(), phi_dot


def build_foliation(m: AmbientManifold, u2, eps0: float, n_levels: int,
                    grid: Grid) -> LevelFoliation:
    """Levels at ``n_levels`` equally spaced tau in ``[-eps0, 0]``."""
    if eps0 <= 0:
        raise FoliationError("eps0 must be positive")
    if n_levels < 2:
        raise FoliationError("need at least two levels")
    surf = as_graph_function(u2, grid)
    taus = np.linspace(-eps0, 0.0, n_levels)
    fol = LevelFoliation(m, grid, surf, float(eps0), taus,
                         np.empty((n_levels, grid.size)), np.empty((n_levels, grid.size)))
    for i, t in enumerate(taus):
        fol.phi[i], fol.phi_dot[i] = fol.level(float(t))
    return fol


def build_foliation_adaptive(m: AmbientManifold, u2, eps0: float, n_levels: int,
                             grid: Grid, max_halvings: int = MAX_HALVINGS) -> LevelFoliation:
    """:func:`build_foliation` with eps0 halved on failure."""
    last = None
    for attempt in range(max_halvings + 1):
        try:
            fol = build_foliation(m, u2, eps0, n_levels, grid)
            verify_foliation(fol)
            return fol
        except FoliationError as exc:
            last = exc
            log.info("foliation failed with eps0=%.4g (%s); halving", eps0, exc)
            eps0 *= 0.5
    raise FoliationError(f"no valid foliation after {max_halvings} halvings: {last}",
                         tau=getattr(last, "tau", None))


@dataclass
class FoliationReport:
    c1: float
    c2: float
    min_phi_dot: float


def verify_foliation(fol: LevelFoliation) -> FoliationReport:
    phi = fol.phi
    taus = fol.taus
    steps = np.diff(phi, axis=0)
    if np.any(steps <= 0):
        i, a = np.argwhere(steps <= 0)[0]
        raise FoliationError(f"phi is not increasing in tau at node {a}", tau=float(taus[i]))
    ratios = []
    for i in range(len(taus)):
        for j in range(i + 1, len(taus)):
            ratios.append(np.abs(phi[j] - phi[i]) / abs(taus[j] - taus[i]))
    ratios = np.concatenate(ratios)
    return FoliationReport(float(ratios.min()), float(ratios.max()), float(fol.phi_dot.min()))
