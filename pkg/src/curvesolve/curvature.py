"""Curvature functions and principal-curvature machinery.

All routines are vectorized over leading axes: ``kappa`` has shape
``(..., n)`` and bilinear forms have shape ``(..., n, n)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ConeViolation, ConfigurationError, IllConditioned, MetricError

KINDS = ("mean", "sigma_k_root", "gauss_root")

# eigenvalues closer than this (relative) are treated as one cluster
CLUSTER_TOL = 1e-8


def elementary_symmetric(kappa, k: int):
    """sigma_k of the last axis; ``elementary_symmetric(kappa, 0) == 1``."""
    kappa = np.asarray(kappa)
    e = [np.ones(kappa.shape[:-1], dtype=kappa.dtype)] + \
        [np.zeros(kappa.shape[:-1], dtype=kappa.dtype) for _ in range(k)]
    for i in range(kappa.shape[-1]):
        x = kappa[..., i]
        for j in range(k, 0, -1):
            e[j] = e[j] + x * e[j - 1]
    return e[k]


@dataclass(frozen=True)
class CurvatureFunction:
    name: str
    n: int
    k: int = 1

    def __post_init__(self):
        if self.name not in KINDS:
            raise ConfigurationError(f"unknown curvature function {self.name!r}")
        if self.name == "sigma_k_root" and not 1 <= self.k <= self.n:
            raise ConfigurationError(f"sigma_k_root needs 1 <= k <= n, got k={self.k}")

    @property
    def label(self) -> str:
        return f"sigma_{self.k}_root" if self.name == "sigma_k_root" else self.name

    def cone_margin(self, kappa):
        """Signed margin to the cone boundary along the diagonal (1, ..., 1).

        Positive inside the cone; ``+inf`` for the mean curvature, whose cone
        is all of R^n.
        """
        kappa = np.asarray(kappa, dtype=float)
        if self.name == "mean":
            return np.full(kappa.shape[:-1], np.inf)
        if self.name == "gauss_root":
            return kappa.min(axis=-1)
        return _sigma_k_margin(kappa, self.k)

    def in_cone(self, kappa):
        return self.cone_margin(kappa) > 0

    def _check(self, kappa):
        inside = self.in_cone(kappa)
        if not np.all(inside):
            bad = np.flatnonzero(~np.atleast_1d(inside))
            pts = np.asarray(kappa).reshape(-1, self.n)[bad]
            raise ConeViolation(
                f"{self.label}: {bad.size} point(s) outside the cone, first {pts[0].tolist()}",
                nodes=bad, points=pts)

    def value(self, kappa, check: bool = True):
        kappa = np.asarray(kappa, dtype=float)
        if check:
            self._check(kappa)
        # sorting makes the result bitwise invariant under permutations
        kappa = np.sort(kappa, axis=-1)
        if self.name == "mean":
            return kappa.sum(axis=-1)
        if self.name == "gauss_root":
            return np.prod(kappa, axis=-1) ** (1.0 / self.n)
        return elementary_symmetric(kappa, self.k) ** (1.0 / self.k)

    def gradient(self, kappa, check: bool = True):
        """Partial derivatives dF/dkappa_i, shape ``(..., n)``."""
        kappa = np.asarray(kappa, dtype=float)
        if check:
            self._check(kappa)
            margin = self.cone_margin(kappa)
            scale = np.maximum(np.abs(kappa).max(axis=-1), 1e-300)
            if np.any(margin <= 1e-12 * scale):
                raise IllConditioned(f"{self.label}: gradient requested on the cone boundary")
        if self.name == "mean":
            return np.ones_like(kappa)
        if self.name == "gauss_root":
            F = self.value(kappa, check=False)
            return F[..., None] / (self.n * kappa)
        k = self.k
        sk = elementary_symmetric(kappa, k)
        out = np.empty_like(kappa)
        for i in range(self.n):
            rest = np.delete(kappa, i, axis=-1)
            out[..., i] = elementary_symmetric(rest, k - 1)
        return (sk ** (1.0 / k - 1.0) / k)[..., None] * out


def _sigma_k_margin(kappa, k):
    # Along e = (1, ..., 1) the Garding cone Gamma_k is left at the smallest root
    # of s -> sigma_k(kappa - s e); all roots are real.  Expand
    # sigma_k(kappa + t e) = sum_j C(n-k+j, j) t^j sigma_{k-j}(kappa).
    n = kappa.shape[-1]
    flat = kappa.reshape(-1, n)
    coeffs = np.stack([comb(n - k + j, j) * (-1.0) ** j * elementary_symmetric(flat, k - j)
                       for j in range(k + 1)], axis=-1)  # ascending powers of s
    if k == 1:
        roots = (-coeffs[:, 0] / coeffs[:, 1])[:, None]
    else:
        lead = coeffs[:, -1:]
        companion = np.zeros((flat.shape[0], k, k))
        companion[:, 1:, :-1] = np.eye(k - 1)
        companion[:, :, -1] = -coeffs[:, :-1] / lead
        roots = np.linalg.eigvals(companion).real
    return roots.min(axis=-1).reshape(kappa.shape[:-1])


def make_curvature(name: str, n: int, k: int | None = None) -> CurvatureFunction:
    if name == "sigma_k_root":
        return CurvatureFunction(name, n, n if k is None else int(k))
    return CurvatureFunction(name, n, 1 if name == "mean" else n)


# -- generalized eigenproblem -------------------------------------------------


@dataclass(frozen=True)
class PrincipalCurvatures:
    kappa: np.ndarray
    frame: np.ndarray | None = None


def _cholesky(g):
    try:
        return np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise MetricError("metric is not positive definite") from None


def principal_curvatures(h, g, with_frame: bool = True) -> PrincipalCurvatures:
    """Solve ``h xi = kappa g xi``; kappa ascending, frame columns g-orthonormal."""
    h = np.asarray(h, dtype=float)
    g = np.asarray(g, dtype=float)
    if h.shape[-1] == 1:
        if np.any(g[..., 0, 0] <= 0):
            raise MetricError("metric is not positive definite")
        kappa = h[..., 0] / g[..., 0, 0][..., None]
        frame = (1.0 / np.sqrt(g)) if with_frame else None
        return PrincipalCurvatures(kappa, frame)
    L = _cholesky(g)
    Linv = np.linalg.inv(L)
    A = Linv @ h @ np.swapaxes(Linv, -1, -2)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    if with_frame:
        kappa, w = np.linalg.eigh(A)
        return PrincipalCurvatures(kappa, np.swapaxes(Linv, -1, -2) @ w)
    return PrincipalCurvatures(np.linalg.eigvalsh(A))


def form_derivatives(F: CurvatureFunction, pc: PrincipalCurvatures):
    """``dF/dh_ij`` and ``dF/dg_ij`` from the spectral chain rule.

    ``dF/dh = sum_a F_a xi_a xi_a^T`` and ``dF/dg = -sum_a F_a kappa_a xi_a xi_a^T``
    for a g-orthonormal eigenframe.  Within a cluster of (numerically) equal
    eigenvalues the F_a are averaged so the result does not depend on the
    arbitrary choice of frame inside the eigenspace.
    """
    kappa, xi = pc.kappa, pc.frame
    Fa = F.gradient(kappa)
    if kappa.shape[-1] == 2:
        scale = np.maximum(np.abs(kappa).max(axis=-1), 1.0)
        close = np.abs(kappa[..., 1] - kappa[..., 0]) <= CLUSTER_TOL * scale
        mean = Fa.mean(axis=-1)
        Fa = np.where(close[..., None], mean[..., None], Fa)
    outer = xi[..., :, None, :] * xi[..., None, :, :]  # [i, j, a]
    dF_dh = np.einsum("...ija,...a->...ij", outer, Fa)
    dF_dg = -np.einsum("...ija,...a->...ij", outer, Fa * kappa)
    return dF_dh, dF_dg


def minmax_shift_check(h, g, s: float, h_prime=None, tol: float = 1e-10):
    """Spectral-shift and monotonicity identities of the pencil (h, g).

    Returns ``(ok, message)``.  Checks kappa(h + s g, g) = kappa(h, g) + s and,
    when ``h_prime`` is given with ``h_prime - h`` positive semidefinite,
    kappa_i(h) <= kappa_i(h_prime) for every i.
    """
    k0 = principal_curvatures(h, g, with_frame=False).kappa
    k1 = principal_curvatures(np.asarray(h) + s * np.asarray(g), g, with_frame=False).kappa
    scale = max(1.0, float(np.max(np.abs(k0))))
    err = float(np.max(np.abs(k1 - k0 - s)))
    if err > tol * scale:
        return False, f"shift identity off by {err:.3e}"
    if h_prime is not None:
        k2 = principal_curvatures(h_prime, g, with_frame=False).kappa
        worst = float(np.max(k0 - k2))
        if worst > tol * scale:
            return False, f"monotonicity violated by {worst:.3e}"
    return True, "ok"
