"""Discrete stand-ins for the base hypersurface S0 with 4th-order stencils.

n = 1: ``n_theta`` uniform periodic nodes on [0, 2 pi).

n = 2: a colatitude/longitude grid with rows at ``phi_j = (j + 1/2) pi / n_phi``
(no nodes on the poles).  Across a pole the stencil continues on the row
reflected through the pole, shifted by half a turn in longitude: the point
``(-phi, theta)`` is the same as ``(phi, theta + pi)``.  A smooth function on
the sphere is therefore a smooth doubly periodic function of ``(phi, theta)``
on ``(-pi, pi) x [0, 2 pi)``, and plain periodic 4th-order stencils apply.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError

# centered 4th-order weights for offsets -2..2
D1_WEIGHTS = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
D2_WEIGHTS = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
OFFSETS = np.arange(-2, 3)


@dataclass(frozen=True)
class Grid:
    dim_n: int
    n_theta: int
    n_phi: int = 0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim_n not in (1, 2):
            raise ConfigurationError("grid dimension must be 1 or 2")
        if self.n_theta < 16:
            raise ConfigurationError("grid.n_theta must be at least 16")
        if self.dim_n == 2:
            if self.n_phi < 4:
                raise ConfigurationError("grid.n_phi must be at least 4")
            if self.n_theta % 2:
                raise ConfigurationError("grid.n_theta must be even on the sphere")

    @property
    def size(self) -> int:
        return self.n_theta if self.dim_n == 1 else self.n_theta * self.n_phi

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_theta,) if self.dim_n == 1 else (self.n_phi, self.n_theta)

    @property
    def h_theta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    @property
    def h_phi(self) -> float:
        return np.pi / self.n_phi if self.dim_n == 2 else 0.0

    @cached_property
    def theta(self) -> np.ndarray:
        return self.h_theta * np.arange(self.n_theta)

    @cached_property
    def phi(self) -> np.ndarray:
        return self.h_phi * (np.arange(self.n_phi) + 0.5)

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(size, n)``; n = 2 ordering is row-major (phi, theta)."""
        if self.dim_n == 1:
            return self.theta[:, None].copy()
        P, T = np.meshgrid(self.phi, self.theta, indexing="ij")
        return np.stack([P.ravel(), T.ravel()], axis=-1)

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights (trapezoid / midpoint with the sin(phi) area factor)."""
        if self.dim_n == 1:
            return np.full(self.n_theta, self.h_theta)
        w = np.sin(self.nodes[:, 0]) * self.h_phi * self.h_theta
        return w

    # -- stencils ------------------------------------------------------------
    def _theta_cols(self, s: int) -> np.ndarray:
        """Index of the node shifted by ``s`` in theta, for every node."""
        nt = self.n_theta
        if self.dim_n == 1:
            return (np.arange(nt) + s) % nt
        j, k = np.divmod(np.arange(self.size), nt)
        return j * nt + (k + s) % nt

    def _phi_cols(self, s: int) -> np.ndarray:
        nt, npf = self.n_theta, self.n_phi
        j, k = np.divmod(np.arange(self.size), nt)
        jj = j + s
        kk = k.copy()
        north = jj < 0
        south = jj >= npf
        jj = np.where(north, -jj - 1, jj)
        jj = np.where(south, 2 * npf - 1 - jj, jj)
        kk = np.where(north | south, (k + nt // 2) % nt, kk)
        return jj * nt + kk

    def _permutation(self, cols: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((np.ones(self.size), (np.arange(self.size), cols)),
                             shape=(self.size, self.size))

    def _theta_shift(self, s: int) -> sp.csr_matrix:
        """Permutation matrix P with (P u)[node] = u[node shifted by s in theta]."""
        return self._permutation(self._theta_cols(s))

    def _phi_shift(self, s: int) -> sp.csr_matrix:
        return self._permutation(self._phi_cols(s))

    def _gather(self, u, cols_of, weights, h):
        # fixed summation order per node, so theta rotations commute exactly
        out = np.zeros_like(u)
        for s, w in zip(OFFSETS, weights):
            if w != 0.0:
                key = (cols_of.__name__, int(s))
                cols = self._cache.get(key)
                if cols is None:
                    cols = self._cache[key] = cols_of(int(s))
                out = out + (w / h) * u[..., cols]
        return out

    def _stencil(self, shift, weights, h) -> sp.csr_matrix:
        out = sp.csr_matrix((self.size, self.size))
        for s, w in zip(OFFSETS, weights):
            if w != 0.0:
                out = out + (w / h) * shift(int(s))
        return out.tocsr()

    def derivative_operators(self) -> dict:
        """Sparse first and second derivative operators.

        Keys are ``(i,)`` for first derivatives and ``(i, j)`` with ``i <= j``
        for second derivatives, indices referring to the coordinates of
        :attr:`nodes`.
        """
        if "ops" in self._cache:
            return self._cache["ops"]
        ht = self.h_theta
        if self.dim_n == 1:
            ops = {
                (0,): self._stencil(self._theta_shift, D1_WEIGHTS, ht),
                (0, 0): self._stencil(self._theta_shift, D2_WEIGHTS, ht**2),
            }
        else:
            hp = self.h_phi
            dp = self._stencil(self._phi_shift, D1_WEIGHTS, hp)
            dt = self._stencil(self._theta_shift, D1_WEIGHTS, ht)
            ops = {
                (0,): dp,
                (1,): dt,
                (0, 0): self._stencil(self._phi_shift, D2_WEIGHTS, hp**2),
                (0, 1): (dp @ dt).tocsr(),
                (1, 1): self._stencil(self._theta_shift, D2_WEIGHTS, ht**2),
            }
        self._cache["ops"] = ops
        return ops

    def derivatives(self, u):
        """First and second coordinate derivatives of nodal ``u``.

        Returns ``p`` with shape ``(size, n)`` and symmetric ``q`` with shape
        ``(size, n, n)``.  Complex ``u`` is supported.
        """
        n = self.dim_n
        u = np.asarray(u)
        if not np.iscomplexobj(u):
            u = u.astype(float)
        p = np.empty(u.shape + (n,), dtype=u.dtype)
        q = np.empty(u.shape + (n, n), dtype=u.dtype)
        ht = self.h_theta
        t_axis = n - 1
        p[..., t_axis] = self._gather(u, self._theta_cols, D1_WEIGHTS, ht)
        q[..., t_axis, t_axis] = self._gather(u, self._theta_cols, D2_WEIGHTS, ht**2)
        if n == 2:
            hp = self.h_phi
            p[..., 0] = self._gather(u, self._phi_cols, D1_WEIGHTS, hp)
            q[..., 0, 0] = self._gather(u, self._phi_cols, D2_WEIGHTS, hp**2)
            q[..., 0, 1] = self._gather(p[..., 1], self._phi_cols, D1_WEIGHTS, hp)
            q[..., 1, 0] = q[..., 0, 1]
        return p, q

    def rotate(self, u, steps: int):
        """Rotate nodal data by ``steps`` grid spacings in theta."""
        u = np.asarray(u)
        if self.dim_n == 1:
            return np.roll(u, -steps, axis=0)
        return np.roll(u.reshape(self.shape + u.shape[1:]), -steps, axis=1).reshape(u.shape)
