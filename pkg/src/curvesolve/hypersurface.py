"""Geometry of graphs ``M = {x0 = u(x)}`` over the discretized base S0.

Sign convention: the normal ``nu = v^-1 e^-psi (1, -u^i)`` points towards
increasing x0, and ``h_ij`` is taken so that geodesic circles/spheres around
the coordinate origin have positive curvature (``1/r`` in Euclidean space).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ambient as amb
from .ambient import AmbientManifold
from .curvature import CurvatureFunction, PrincipalCurvatures, principal_curvatures
from .errors import UnsupportedError
from .grid import Grid
from .kernels import graph_geometry


def ambient_samples(m: AmbientManifold, u, x):
    """Ambient data at the graph points ``(u, x)`` in the order the kernel expects."""
    sigma, d0, dk = amb.slice_metric(m, u, x)
    psi, dpsi0, dpsik = m.conformal(u, x)
    return sigma, d0, dk, psi, dpsi0, dpsik


def pointwise_geometry(m: AmbientManifold, grid: Grid, u, p, q, backend=None):
    """``(g, h, v, nu)`` at every node from ``u`` and its stencil derivatives."""
    return graph_geometry(p, q, *ambient_samples(m, u, grid.nodes), backend=backend)


@dataclass(frozen=True, eq=False)
class GraphState:
    """Nodal graph function with its cached geometric quantities.

    ``grad_sq`` is ``|Du|^2 = sigma^ij u_i u_j``; ``nu`` stores the
    contravariant components ``(nu^0, nu^1, ..., nu^n)``.
    """

    u: np.ndarray
    p: np.ndarray
    q: np.ndarray
    v: np.ndarray
    nu: np.ndarray
    g: np.ndarray
    h: np.ndarray
    kappa: np.ndarray
    frame: np.ndarray

    @property
    def grad_sq(self) -> np.ndarray:
        return self.v**2 - 1.0

    @property
    def principal(self) -> PrincipalCurvatures:
        return PrincipalCurvatures(self.kappa, self.frame)

    def checksum(self) -> str:
        import hashlib
        return hashlib.sha256(np.ascontiguousarray(self.u, dtype=np.float64).tobytes()).hexdigest()[:16]


def graph_quantities(m: AmbientManifold, u, grid: Grid, backend=None) -> GraphState:
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.size,):
        raise ValueError(f"u has shape {u.shape}, grid needs ({grid.size},)")
    p, q = grid.derivatives(u)
    g, h, v, nu = pointwise_geometry(m, grid, u, p, q, backend=backend)
    pc = principal_curvatures(h, g)
    return GraphState(u, p, q, v, nu, g, h, pc.kappa, pc.frame)


def second_fundamental_form(m: AmbientManifold, s, grid: Grid):
    """Nodal ``h_ij`` (accepts a GraphState or raw nodal ``u``)."""
    if isinstance(s, GraphState):
        return s.h
    return graph_quantities(m, s, grid).h


def hessian_form_crosscheck(m: AmbientManifold, s, grid: Grid):
    """``h_ij`` through the slice-Hessian route.

    Uses ``e^-psi v^-1 h_ij = -v^-2 u_;ij + hbar_ij + v^-1 psi_a nut^a gt_ij``,
    with ``u_;ij`` the Hessian for the metric ``sigma_ij(u(x), x)`` on S0,
    ``hbar_ij = 1/2 d0 sigma_ij`` the slice second fundamental form for the
    conformal metric, ``nut = e^psi nu`` and ``gt = e^-2psi g``.  No
    Christoffel symbols of the induced metric are involved, which makes this
    an independent check of :func:`second_fundamental_form`.
    """
    u = s.u if isinstance(s, GraphState) else np.asarray(s, dtype=float)
    x = grid.nodes
    p, q = grid.derivatives(u)
    sigma, d0, dk, psi, dpsi0, dpsik = ambient_samples(m, u, x)
    # total derivatives of sigma_ij(u(x), x)
    dsig = dk + p[:, :, None, None] * d0[:, None, :, :]
    sinv = np.linalg.inv(sigma)
    lower = dsig + np.swapaxes(dsig, 1, 2) - np.moveaxis(dsig, 1, 3)
    gam = 0.5 * np.einsum("nkl,nijl->nkij", sinv, lower)
    hess = q - np.einsum("nkij,nk->nij", gam, p)
    up = np.einsum("nij,nj->ni", sinv, p)
    v = np.sqrt(1.0 + np.einsum("ni,ni->n", up, p))
    hbar = 0.5 * d0
    psi_nu = (dpsi0 - np.einsum("ni,ni->n", dpsik, up)) / v
    gt = p[:, :, None] * p[:, None, :] + sigma
    rhs = -hess / (v**2)[:, None, None] + hbar + (psi_nu / v)[:, None, None] * gt
    return (np.exp(psi) * v)[:, None, None] * rhs


@dataclass
class AdmissibilityReport:
    admissible: bool
    violating_nodes: list
    margins: np.ndarray

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margins))


def admissibility(s: GraphState, F: CurvatureFunction) -> AdmissibilityReport:
    margins = F.cone_margin(s.kappa)
    bad = np.flatnonzero(~(margins > 0))
    return AdmissibilityReport(bad.size == 0, bad.tolist(), margins)


# -- independent curvature oracle (n = 1) --------------------------------------


def _spectral_derivative(values, order: int):
    n = values.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n)
    if order % 2 and n % 2 == 0:
        k[n // 2] = 0.0
    c = np.fft.fft(values, axis=0)
    factor = (1j * k) ** order
    return np.real(np.fft.ifft(factor.reshape((-1,) + (1,) * (values.ndim - 1)) * c, axis=0))


def embedding_oracle(u, grid: Grid, m: AmbientManifold):
    """Curvature of the curve ``r = u(theta)`` computed in an isometric embedding.

    Euclidean plane, unit sphere in R^3, or the hyperboloid model in
    Minkowski space.  Derivatives of the embedded coordinates are spectral, so
    for smooth periodic data the result is exact to roundoff and independent
    of the finite-difference stencils.
    """
    if grid.dim_n != 1 or m.dim_n != 1:
        raise UnsupportedError("embedding oracle is implemented for curves only")
    if m.psi is not None or m.kind not in ("euclidean_polar", "sphere_polar", "hyperbolic_polar"):
        raise UnsupportedError(f"no isometric embedding known for ambient {m.kind!r}")
    r = np.asarray(u, dtype=float)
    th = grid.theta
    c, s = np.cos(th), np.sin(th)
    if m.kind == "euclidean_polar":
        X = np.stack([r * c, r * s], axis=-1)
        Er = np.stack([c, s], axis=-1)
        eta = np.array([1.0, 1.0])
    elif m.kind == "sphere_polar":
        X = np.stack([np.sin(r) * c, np.sin(r) * s, np.cos(r)], axis=-1)
        Er = np.stack([np.cos(r) * c, np.cos(r) * s, -np.sin(r)], axis=-1)
        eta = np.array([1.0, 1.0, 1.0])
    else:
        X = np.stack([np.cosh(r), np.sinh(r) * c, np.sinh(r) * s], axis=-1)
        Er = np.stack([np.sinh(r), np.cosh(r) * c, np.cosh(r) * s], axis=-1)
        eta = np.array([-1.0, 1.0, 1.0])

    def dot(a, b):
        return np.sum(eta * a * b, axis=-1)

    X1 = _spectral_derivative(X, 1)
    X2 = _spectral_derivative(X, 2)
    if m.kind != "euclidean_polar":
        # project the acceleration onto the tangent space of the model surface
        X2 = X2 - (dot(X2, X) / dot(X, X))[:, None] * X
    speed_sq = dot(X1, X1)
    T = X1 / np.sqrt(speed_sq)[:, None]
    n_out = Er - dot(Er, T)[:, None] * T
    n_out = n_out / np.sqrt(dot(n_out, n_out))[:, None]
    return -dot(X2, n_out) / speed_sq


def state_table(s: GraphState, grid: Grid) -> str:
    """Tabular text export: node coordinates, u, v, kappa_1..kappa_n."""
    n = grid.dim_n
    names = ["theta"] if n == 1 else ["phi", "theta"]
    header = names + ["u", "v"] + [f"kappa{i + 1}" for i in range(n)]
    lines = ["\t".join(header)]
    for a in range(grid.size):
        row = list(grid.nodes[a]) + [s.u[a], s.v[a]] + list(s.kappa[a])
        lines.append("\t".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"
