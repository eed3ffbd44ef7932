"""Ambient Riemannian manifolds in normal Gaussian coordinates.

The ambient metric is ``exp(2 psi) * (dx0^2 + sigma_ij(x0, x) dx^i dx^j)``.
All built-ins are warped products ``sigma_ij = rho(x0)^2 * s_ij(x)`` where
``s_ij`` is the round metric of the unit circle (n = 1) or the unit sphere in
colatitude/longitude coordinates ``x = (phi, theta)`` (n = 2).

Angular coordinates are passed as arrays of shape ``(..., n)``; ``x0`` has the
leading shape ``(...)``.  Every routine accepts complex ``x0`` so that
complex-step differentiation can be pushed through the geometry.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DomainError, UnsupportedError
from .expressions import Expression

KINDS = ("euclidean_polar", "sphere_polar", "hyperbolic_polar", "warped")


@dataclass(frozen=True)
class RadialFunction:
    """A function of x0 alone with its first two derivatives."""

    f: Callable
    df: Callable
    d2f: Callable
    label: str = ""

    @classmethod
    def from_expression(cls, text: str) -> "RadialFunction":
        e = Expression(text, ["x0"])
        d1 = e.derivative("x0")
        d2 = d1.derivative("x0")
        return cls(lambda r: e(x0=r), lambda r: d1(x0=r), lambda r: d2(x0=r), text)


@dataclass(frozen=True)
class ConformalFactor:
    """psi(x0, x) with its partial derivatives, built from an expression."""

    text: str
    dim_n: int
    _expr: Expression = field(init=False, repr=False, compare=False)
    _d0: Expression = field(init=False, repr=False, compare=False)
    _dx: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = angle_names(self.dim_n)
        e = Expression(self.text, ["x0", *names])
        object.__setattr__(self, "_expr", e)
        object.__setattr__(self, "_d0", e.derivative("x0"))
        object.__setattr__(self, "_dx", tuple(e.derivative(a) for a in names))

    def __call__(self, x0, x):
        kw = {"x0": x0, **{a: x[..., i] for i, a in enumerate(angle_names(self.dim_n))}}
        psi = self._expr(**kw)
        d0 = self._d0(**kw)
        dx = np.stack([d(**kw) for d in self._dx], axis=-1)
        return psi, d0, dx


def angle_names(dim_n: int) -> tuple[str, ...]:
    return ("theta",) if dim_n == 1 else ("phi", "theta")


_BUILTIN_WARPS = {
    "euclidean_polar": RadialFunction(lambda r: r, lambda r: np.ones_like(r),
                                      lambda r: np.zeros_like(r), "x0"),
    "sphere_polar": RadialFunction(np.sin, np.cos, lambda r: -np.sin(r), "sin(x0)"),
    "hyperbolic_polar": RadialFunction(np.sinh, np.cosh, np.sinh, "sinh(x0)"),
}
_BUILTIN_RANGES = {
    "euclidean_polar": (0.0, np.inf),
    "sphere_polar": (0.0, np.pi),
    "hyperbolic_polar": (0.0, np.inf),
}
# strictly convex radial functions: chi'' > 0 and chi' rho rho' > 0
_BUILTIN_CHI = {
    "euclidean_polar": RadialFunction(lambda r: 0.5 * r**2, lambda r: r, np.ones_like, "x0^2/2"),
    "sphere_polar": RadialFunction(lambda r: -np.cos(r), np.sin, np.cos, "-cos(x0)"),
    "hyperbolic_polar": RadialFunction(np.cosh, np.sinh, np.cosh, "cosh(x0)"),
}


@dataclass(frozen=True)
class AmbientManifold:
    kind: str
    dim_n: int
    warp: RadialFunction
    x0_range: tuple[float, float]
    psi: ConformalFactor | None = None
    chi: RadialFunction | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedError(f"unknown ambient kind {self.kind!r}")
        if self.dim_n not in (1, 2):
            raise UnsupportedError("only n = 1 and n = 2 are supported")

    # -- chart -----------------------------------------------------------
    def check_chart(self, x0, x=None) -> None:
        r = np.real(np.asarray(x0))
        lo, hi = self.x0_range
        bad = ~((r > lo) & (r < hi))
        if np.any(bad):
            idx = np.flatnonzero(np.atleast_1d(bad))
            raise DomainError(
                f"x0 outside the chart ({lo}, {hi}) at {idx.size} point(s), "
                f"first index {idx[0]} with x0={np.atleast_1d(r)[idx[0]]:.6g}")
        if x is not None and self.dim_n == 2:
            phi = np.real(np.asarray(x)[..., 0])
            if np.any((phi <= 0) | (phi >= np.pi)):
                raise DomainError("colatitude outside (0, pi)")

    def with_psi(self, text: str) -> "AmbientManifold":
        return replace(self, psi=ConformalFactor(text, self.dim_n))

    # -- metric pieces ---------------------------------------------------
    def round_metric(self, x):
        """Unit-sphere metric ``s_ij(x)`` and its derivatives ``d_k s_ij``."""
        shape = np.shape(x)[:-1]
        n = self.dim_n
        s = np.zeros(shape + (n, n), dtype=np.result_type(x, float))
        ds = np.zeros(shape + (n, n, n), dtype=s.dtype)
        if n == 1:
            s[..., 0, 0] = 1.0
        else:
            phi = x[..., 0]
            s[..., 0, 0] = 1.0
            s[..., 1, 1] = np.sin(phi) ** 2
            ds[..., 0, 1, 1] = 2.0 * np.sin(phi) * np.cos(phi)
        return s, ds

    def conformal(self, x0, x):
        """``(psi, d0 psi, d_k psi)``; zeros when no conformal factor is set."""
        if self.psi is None:
            z = np.zeros(np.shape(x0), dtype=np.result_type(x0, float))
            return z, z.copy(), np.zeros(np.shape(x0) + (self.dim_n,), dtype=z.dtype)
        return self.psi(x0, x)


def builtin(kind: str, dim_n: int = 1) -> AmbientManifold:
    if kind not in _BUILTIN_WARPS:
        raise UnsupportedError(f"{kind!r} is not a built-in space form")
    return AmbientManifold(kind, dim_n, _BUILTIN_WARPS[kind], _BUILTIN_RANGES[kind],
                           chi=_BUILTIN_CHI[kind])


def warped(rho: str, dim_n: int = 1, x0_range=(-np.inf, np.inf),
           chi: str | None = None) -> AmbientManifold:
    """User warped product ``dx0^2 + rho(x0)^2 * round metric``."""
    return AmbientManifold("warped", dim_n, RadialFunction.from_expression(rho),
                           tuple(float(v) for v in x0_range),
                           chi=None if chi is None else RadialFunction.from_expression(chi))


def slice_metric(m: AmbientManifold, x0, x):
    """Slice metric and its first partials: ``(sigma, d0 sigma, d_k sigma)``.

    ``d_k sigma`` is stored with the derivative index first, shape ``(..., n, n, n)``.
    """
    x0 = np.asarray(x0)
    x = np.asarray(x)
    m.check_chart(x0, x)
    rho = m.warp.f(x0)
    drho = m.warp.df(x0)
    s, ds = m.round_metric(x)
    sigma = (rho**2)[..., None, None] * s
    d0 = (2.0 * rho * drho)[..., None, None] * s
    dk = (rho**2)[..., None, None, None] * ds
    return sigma, d0, dk


def _inv(a):
    if a.shape[-1] == 1:
        return 1.0 / a
    det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    out = np.empty_like(a)
    out[..., 0, 0] = a[..., 1, 1] / det
    out[..., 1, 1] = a[..., 0, 0] / det
    out[..., 0, 1] = -a[..., 0, 1] / det
    out[..., 1, 0] = -a[..., 1, 0] / det
    return out


def conformal_christoffels(m: AmbientManifold, x0, x):
    """Christoffel symbols of ``dx0^2 + sigma_ij dx^i dx^j``.

    Returned as one array ``G[..., a, b, c]`` = Gamma^a_{bc} with index 0 the
    x0 direction, so ``G[..., 0, 0, 0]``, ``G[..., 0, 0, 1:]``,
    ``G[..., 0, 1:, 1:]`` and ``G[..., 1:, 1:, 1:]`` are the four blocks the
    graph formulas use.
    """
    sigma, d0, dk = slice_metric(m, x0, x)
    n = m.dim_n
    inv = _inv(sigma)
    G = np.zeros(np.shape(x0) + (n + 1,) * 3, dtype=sigma.dtype)
    G[..., 0, 1:, 1:] = -0.5 * d0
    half = 0.5 * np.einsum("...kl,...lj->...kj", inv, d0)
    G[..., 1:, 0, 1:] = half
    G[..., 1:, 1:, 0] = half
    # Gamma^k_ij = 1/2 s^kl (d_i s_jl + d_j s_il - d_l s_ij)
    t = dk.transpose(*range(dk.ndim - 3), -3, -2, -1)  # [i, j, l] = d_i s_jl
    lower = t + np.swapaxes(t, -3, -2) - np.moveaxis(t, -3, -1)
    G[..., 1:, 1:, 1:] = 0.5 * np.einsum("...kl,...ijl->...kij", inv, lower)
    return G


def ambient_christoffels(m: AmbientManifold, x0, x):
    """Christoffel symbols of the full metric ``exp(2 psi) * (dx0^2 + sigma)``."""
    G = conformal_christoffels(m, x0, x)
    if m.psi is None:
        return G
    sigma, _, _ = slice_metric(m, x0, x)
    psi, p0, pk = m.conformal(x0, x)
    n = m.dim_n
    dpsi = np.concatenate([p0[..., None], pk], axis=-1)
    gt = np.zeros(np.shape(x0) + (n + 1, n + 1), dtype=G.dtype)
    gt[..., 0, 0] = 1.0
    gt[..., 1:, 1:] = sigma
    gt_inv = np.zeros_like(gt)
    gt_inv[..., 0, 0] = 1.0
    gt_inv[..., 1:, 1:] = _inv(sigma)
    eye = np.eye(n + 1)
    up = np.einsum("...ad,...d->...a", gt_inv, dpsi)
    G = G + np.einsum("ab,...c->...abc", eye, dpsi) + np.einsum("ac,...b->...abc", eye, dpsi) \
        - np.einsum("...bc,...a->...abc", gt, up)
    return G


def ambient_metric(m: AmbientManifold, x0, x):
    sigma, _, _ = slice_metric(m, x0, x)
    psi, _, _ = m.conformal(x0, x)
    n = m.dim_n
    g = np.zeros(np.shape(x0) + (n + 1, n + 1), dtype=sigma.dtype)
    g[..., 0, 0] = 1.0
    g[..., 1:, 1:] = sigma
    return np.exp(2.0 * psi)[..., None, None] * g


@dataclass(frozen=True)
class ConvexReference:
    """Strictly convex ambient function chi(x0) with its Hessian."""

    ambient: AmbientManifold
    radial: RadialFunction

    def __call__(self, x0):
        return self.radial.f(np.asarray(x0))

    def hessian(self, x0, x):
        """Coordinate Hessian ``chi_{;ab}`` (shape ``(..., n+1, n+1)``)."""
        x0 = np.asarray(x0)
        sigma, d0, _ = slice_metric(self.ambient, x0, x)
        n = self.ambient.dim_n
        H = np.zeros(np.shape(x0) + (n + 1, n + 1))
        H[..., 0, 0] = self.radial.d2f(x0)
        # chi_{;ij} = -Gamma^0_ij chi' = 1/2 d0 sigma_ij chi'
        H[..., 1:, 1:] = 0.5 * d0 * self.radial.df(x0)[..., None, None]
        return H

    def hessian_eigenvalues(self, x0, x):
        """Eigenvalues of the Hessian relative to the ambient metric."""
        H = self.hessian(x0, x)
        g = ambient_metric(self.ambient, x0, x)
        L = np.linalg.cholesky(g)
        Li = np.linalg.inv(L)
        A = Li @ H @ np.swapaxes(Li, -1, -2)
        return np.linalg.eigvalsh(A)


def strictly_convex_reference(m: AmbientManifold) -> ConvexReference:
    if m.psi is not None:
        raise UnsupportedError("no convex reference function for conformally perturbed ambients")
    if m.chi is None:
        raise UnsupportedError(
            f"no strictly convex function configured for ambient {m.kind!r}; set ambient.chi")
    return ConvexReference(m, m.chi)
