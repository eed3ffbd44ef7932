"""Hot per-node kernels.

``graph_geometry`` turns the stencil derivatives of a graph ``x0 = u(x)`` and
the ambient data sampled at ``(u(x), x)`` into the induced metric, the second
fundamental form, ``v`` and the unit normal.  It runs once per residual
evaluation and several times per Jacobian assembly (complex-step sweeps), so
it exists twice: a numba loop kernel and a vectorized numpy fallback.  Both
accept float64 and complex128 input.  ``_accel.USE_NUMBA`` picks the default.
"""
from __future__ import annotations

import numpy as np

from . import _accel


def _inv_small(a):
    n = a.shape[-1]
    if n == 1:
        return 1.0 / a
    det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    out = np.empty_like(a)
    out[..., 0, 0] = a[..., 1, 1] / det
    out[..., 1, 1] = a[..., 0, 0] / det
    out[..., 0, 1] = -a[..., 0, 1] / det
    out[..., 1, 0] = -a[..., 1, 0] / det
    return out


def graph_geometry_numpy(p, q, sigma, dsig0, dsigk, psi, dpsi0, dpsik):
    e2 = np.exp(2.0 * psi)
    pp = p[:, :, None] * p[:, None, :]
    gt = pp + sigma
    g = e2[:, None, None] * gt
    # total derivative d_k g_ij along the graph
    chain = 2.0 * (dpsi0[:, None] * p + dpsik)
    dg = e2[:, None, None, None] * (
        chain[:, :, None, None] * gt[:, None, :, :]
        + q[:, :, :, None] * p[:, None, None, :]
        + p[:, None, :, None] * q[:, :, None, :]
        + p[:, :, None, None] * dsig0[:, None, :, :]
        + dsigk
    )
    ginv = _inv_small(g)
    # lower[i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    lower = dg + np.swapaxes(dg, 1, 2) - np.moveaxis(dg, 1, 3)
    gam = 0.5 * np.einsum("nkl,nijl->nkij", ginv, lower)
    hess = q - np.einsum("nkij,nk->nij", gam, p)
    sinv = _inv_small(sigma)
    up = np.einsum("nij,nj->ni", sinv, p)
    v = np.sqrt(1.0 + np.einsum("ni,ni->n", up, p))
    # Christoffels of the full ambient metric with upper index 0
    g000 = dpsi0
    g00i = dpsik
    g0ij = -0.5 * dsig0 - sigma * dpsi0[:, None, None]
    rhs = (-hess - g000[:, None, None] * pp
           - g00i[:, :, None] * p[:, None, :] - p[:, :, None] * g00i[:, None, :] - g0ij)
    scale = v * np.exp(psi)
    h = scale[:, None, None] * rhs
    nu = np.empty((p.shape[0], p.shape[1] + 1), dtype=h.dtype)
    nu[:, 0] = 1.0 / scale
    nu[:, 1:] = -up / scale[:, None]
    return g, h, v, nu


def _graph_geometry_loops(p, q, sigma, dsig0, dsigk, psi, dpsi0, dpsik):
    N, n = p.shape
    dt = p.dtype
    g = np.empty((N, n, n), dtype=dt)
    h = np.empty((N, n, n), dtype=dt)
    v = np.empty(N, dtype=dt)
    nu = np.empty((N, n + 1), dtype=dt)
    gt = np.empty((n, n), dtype=dt)
    dg = np.empty((n, n, n), dtype=dt)
    ginv = np.empty((n, n), dtype=dt)
    sinv = np.empty((n, n), dtype=dt)
    up = np.empty(n, dtype=dt)
    chain = np.empty(n, dtype=dt)
    for a in range(N):
        e2 = np.exp(2.0 * psi[a])
        for i in range(n):
            chain[i] = 2.0 * (dpsi0[a] * p[a, i] + dpsik[a, i])
            for j in range(n):
                gt[i, j] = p[a, i] * p[a, j] + sigma[a, i, j]
                g[a, i, j] = e2 * gt[i, j]
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    dg[k, i, j] = e2 * (chain[k] * gt[i, j] + q[a, k, i] * p[a, j]
                                        + p[a, i] * q[a, j, k] + p[a, k] * dsig0[a, i, j]
                                        + dsigk[a, k, i, j])
        if n == 1:
            ginv[0, 0] = 1.0 / g[a, 0, 0]
            sinv[0, 0] = 1.0 / sigma[a, 0, 0]
        else:
            det = g[a, 0, 0] * g[a, 1, 1] - g[a, 0, 1] * g[a, 1, 0]
            ginv[0, 0] = g[a, 1, 1] / det
            ginv[1, 1] = g[a, 0, 0] / det
            ginv[0, 1] = -g[a, 0, 1] / det
            ginv[1, 0] = -g[a, 1, 0] / det
            det = sigma[a, 0, 0] * sigma[a, 1, 1] - sigma[a, 0, 1] * sigma[a, 1, 0]
            sinv[0, 0] = sigma[a, 1, 1] / det
            sinv[1, 1] = sigma[a, 0, 0] / det
            sinv[0, 1] = -sigma[a, 0, 1] / det
            sinv[1, 0] = -sigma[a, 1, 0] / det
        vsq = 1.0 + 0.0 * p[a, 0]
        for i in range(n):
            up[i] = 0.0
            for j in range(n):
                up[i] += sinv[i, j] * p[a, j]
            vsq += up[i] * p[a, i]
        va = np.sqrt(vsq)
        v[a] = va
        scale = va * np.exp(psi[a])
        for i in range(n):
            for j in range(n):
                cov = q[a, i, j]
                for k in range(n):
                    gam = 0.0 * cov
                    for l in range(n):
                        gam += 0.5 * ginv[k, l] * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j])
                    cov -= gam * p[a, k]
                g0ij = -0.5 * dsig0[a, i, j] - sigma[a, i, j] * dpsi0[a]
                h[a, i, j] = scale * (-cov - dpsi0[a] * p[a, i] * p[a, j]
                                      - dpsik[a, i] * p[a, j] - p[a, i] * dpsik[a, j] - g0ij)
        nu[a, 0] = 1.0 / scale
        for i in range(n):
            nu[a, i + 1] = -up[i] / scale
    return g, h, v, nu


graph_geometry_numba = _accel.njit(_graph_geometry_loops)


def graph_geometry(p, q, sigma, dsig0, dsigk, psi, dpsi0, dpsik, backend: str | None = None):
    """Induced metric, second fundamental form, ``v`` and normal at every node.

    Parameters are the stencil derivatives ``p`` (N, n), ``q`` (N, n, n) of the
    graph function and the ambient data at ``(u, x)``: ``sigma``, ``d0 sigma``,
    ``d_k sigma`` (derivative index first), ``psi`` and its partials.
    """
    if backend is None:
        backend = _accel.backend_name()
    args = _coerce(p, q, sigma, dsig0, dsigk, psi, dpsi0, dpsik)
    if backend == "numba":
        return graph_geometry_numba(*args)
    return graph_geometry_numpy(*args)


def _coerce(*arrays):
    dtype = np.result_type(*arrays, np.float64)
    return tuple(np.ascontiguousarray(a, dtype=dtype) for a in arrays)


def warmup() -> None:
    """Compile the numba kernels for both dtypes (no-op on the numpy backend)."""
    if _accel.backend_name() != "numba":
        return
    for n in (1, 2):
        for dt in (np.float64, np.complex128):
            p = np.zeros((2, n), dtype=dt)
            q = np.zeros((2, n, n), dtype=dt)
            s = np.zeros((2, n, n), dtype=dt) + np.eye(n)
            graph_geometry(p, q, s, q, np.zeros((2, n, n, n), dt), np.zeros(2, dt),
                           np.zeros(2, dt), p)
        x = np.ones((2, n + 1))
        for code in WARP_CODES:
            geodesic_rk4(x, 0.1 * x, 0.01, 2, code, None, None)


# -- normal geodesics in warped products --------------------------------------
#
# For dx0^2 + rho(x0)^2 s_ij the geodesic equation reads
#   x0'' = rho rho' s_ij w^i w^j
#   x^k'' = -2 (rho'/rho) w^0 w^k - Gamma(s)^k_ij w^i w^j
# with Gamma(s) the Christoffels of the round metric.

WARP_CODES = {"euclidean_polar": 0, "sphere_polar": 1, "hyperbolic_polar": 2}


def _round_accel(x, w, n):
    """``s_ij w^i w^j`` and ``-Gamma(s)^k_ij w^i w^j`` for the unit circle/sphere."""
    if n == 1:
        return w[..., 1] ** 2, np.zeros_like(w[..., 1:])
    phi = x[..., 1]
    s, c = np.sin(phi), np.cos(phi)
    quad = w[..., 1] ** 2 + s * s * w[..., 2] ** 2
    acc = np.empty_like(w[..., 1:])
    acc[..., 0] = s * c * w[..., 2] ** 2
    acc[..., 1] = -2.0 * (c / s) * w[..., 1] * w[..., 2]
    return quad, acc


def geodesic_rk4_numpy(x, w, length, steps, rho, drho):
    n = x.shape[-1] - 1

    def rhs(x, w):
        r = x[..., 0]
        f, df = rho(r), drho(r)
        quad, acc = _round_accel(x, w, n)
        a = np.empty_like(w)
        a[..., 0] = f * df * quad
        a[..., 1:] = acc - 2.0 * (df / f)[..., None] * w[..., :1] * w[..., 1:]
        return w, a

    hs = length / steps
    x = np.array(x, dtype=float)
    w = np.array(w, dtype=float)
    for _ in range(steps):
        k1x, k1w = rhs(x, w)
        k2x, k2w = rhs(x + 0.5 * hs * k1x, w + 0.5 * hs * k1w)
        k3x, k3w = rhs(x + 0.5 * hs * k2x, w + 0.5 * hs * k2w)
        k4x, k4w = rhs(x + hs * k3x, w + hs * k3w)
        x = x + hs / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        w = w + hs / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
    return x, w


def _warp_eval(code, r):
    if code == 0:
        return r, 1.0
    if code == 1:
        return np.sin(r), np.cos(r)
    return np.sinh(r), np.cosh(r)


def _accel_point(code, n, x, w, out):
    f, df = _warp_eval(code, x[0])
    if n == 1:
        quad = w[1] * w[1]
        out[1] = -2.0 * (df / f) * w[0] * w[1]
    else:
        s = np.sin(x[1])
        c = np.cos(x[1])
        quad = w[1] * w[1] + s * s * w[2] * w[2]
        out[1] = s * c * w[2] * w[2] - 2.0 * (df / f) * w[0] * w[1]
        out[2] = -2.0 * (c / s) * w[1] * w[2] - 2.0 * (df / f) * w[0] * w[2]
    out[0] = f * df * quad


def _geodesic_rk4_loops(x, w, length, steps, code):
    N, m = x.shape
    n = m - 1
    hs = length / steps
    xo = x.copy()
    wo = w.copy()
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    xt = np.empty(m)
    wt = np.empty(m)
    for a in range(N):
        xa = xo[a]
        wa = wo[a]
        for _ in range(steps):
            _accel_point(code, n, xa, wa, k1)
            for i in range(m):
                xt[i] = xa[i] + 0.5 * hs * wa[i]
                wt[i] = wa[i] + 0.5 * hs * k1[i]
            v2 = wt.copy()
            _accel_point(code, n, xt, wt, k2)
            for i in range(m):
                xt[i] = xa[i] + 0.5 * hs * v2[i]
                wt[i] = wa[i] + 0.5 * hs * k2[i]
            v3 = wt.copy()
            _accel_point(code, n, xt, wt, k3)
            for i in range(m):
                xt[i] = xa[i] + hs * v3[i]
                wt[i] = wa[i] + hs * k3[i]
            v4 = wt.copy()
            _accel_point(code, n, xt, wt, k4)
            for i in range(m):
                xa[i] = xa[i] + hs / 6.0 * (wa[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i])
                wa[i] = wa[i] + hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return xo, wo


_warp_eval = _accel.njit(_warp_eval)
_accel_point = _accel.njit(_accel_point)
geodesic_rk4_numba = _accel.njit(_geodesic_rk4_loops)


def geodesic_rk4(x, w, length, steps, warp_kind, rho, drho, backend: str | None = None):
    """RK4 normal-geodesic flow in a warped product with psi = 0.

    ``warp_kind`` selects the compiled warp for built-in space forms; user
    warps (and the numpy backend) go through the vectorized path with the
    ``rho``/``drho`` callables.
    """
    if backend is None:
        backend = _accel.backend_name()
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if backend == "numba" and warp_kind in WARP_CODES:
        return geodesic_rk4_numba(x, w, float(length), int(steps), WARP_CODES[warp_kind])
    return geodesic_rk4_numpy(x, w, length, steps, rho, drho)
