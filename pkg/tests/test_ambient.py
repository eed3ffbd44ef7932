from __future__ import annotations

import numpy as np
import pytest

from curvesolve import ambient
from curvesolve.errors import DomainError, UnsupportedError


def test_slice_metric_examples(euclid, sphere, hyperbolic):
    x = np.zeros((1, 1))
    s, d0, _ = ambient.slice_metric(euclid, np.array([2.0]), x)
    assert s[0, 0, 0] == 4.0 and d0[0, 0, 0] == 4.0
    s, d0, _ = ambient.slice_metric(sphere, np.array([np.pi / 4]), x)
    assert s[0, 0, 0] == pytest.approx(0.5, abs=1e-15)
    assert d0[0, 0, 0] == pytest.approx(1.0, abs=1e-15)
    s, _, _ = ambient.slice_metric(hyperbolic, np.array([1.0]), x)
    assert s[0, 0, 0] == pytest.approx(np.sinh(1.0) ** 2, rel=1e-15)
    assert s[0, 0, 0] == pytest.approx(1.3811, abs=1e-4)


def test_chart_violation(sphere):
    with pytest.raises(DomainError):
        ambient.slice_metric(sphere, np.array([3.5]), np.zeros((1, 1)))


def test_conformal_christoffel_examples(euclid, sphere):
    G = ambient.conformal_christoffels(euclid, np.array([2.0]), np.zeros((1, 1)))
    assert G[0, 0, 1, 1] == -2.0
    G = ambient.conformal_christoffels(sphere, np.array([np.pi / 4]), np.zeros((1, 1)))
    assert G[0, 0, 1, 1] == pytest.approx(-0.5, abs=1e-15)
    flat = ambient.warped("1", 1)
    G = ambient.conformal_christoffels(flat, np.array([0.3]), np.zeros((1, 1)))
    assert np.all(G == 0)


def _fd_christoffels(m, x0, x, h=1e-4):
    """Christoffels from central differences of the full metric."""
    n = m.dim_n

    def metric(y):
        return ambient.ambient_metric(m, np.array([y[0]]), y[None, 1:])[0]

    y = np.concatenate([[x0], x])
    dg = np.empty((n + 1, n + 1, n + 1))
    for c in range(n + 1):
        e = np.zeros(n + 1)
        e[c] = h
        dg[c] = (metric(y + e) - metric(y - e)) / (2 * h)
    ginv = np.linalg.inv(metric(y))
    lower = dg + np.swapaxes(dg, 0, 1) - np.moveaxis(dg, 0, 2)
    return 0.5 * np.einsum("ad,bcd->abc", ginv, lower)


@pytest.mark.parametrize("kind,dim_n,psi", [
    ("sphere_polar", 2, None),
    ("hyperbolic_polar", 2, None),
    ("euclidean_polar", 1, "0.1*sin(x0)*cos(theta) + 0.05*x0"),
    ("sphere_polar", 2, "0.1*sin(x0)*cos(phi) + 0.05*x0*sin(phi)*sin(theta)"),
])
def test_christoffels_match_finite_differences(kind, dim_n, psi, rng):
    m = ambient.builtin(kind, dim_n)
    if psi:
        m = m.with_psi(psi)
    worst = 0.0
    for _ in range(100):
        x0 = rng.uniform(0.3, 1.2)
        x = rng.uniform([0.3, 0.0][:dim_n], [2.8, 2 * np.pi][:dim_n]) if dim_n == 2 \
            else rng.uniform(0, 2 * np.pi, size=1)
        G = ambient.ambient_christoffels(m, np.array([x0]), x[None, :])[0]
        Gfd = _fd_christoffels(m, x0, x)
        worst = max(worst, np.max(np.abs(G - Gfd)) / max(1.0, np.max(np.abs(G))))
    assert worst <= 1e-6


def test_space_form_identity_gamma0ij(rng):
    for kind in ("euclidean_polar", "sphere_polar", "hyperbolic_polar"):
        m = ambient.builtin(kind, 2)
        x0 = rng.uniform(0.2, 1.4, size=20)
        x = np.column_stack([rng.uniform(0.2, 2.9, 20), rng.uniform(0, 6, 20)])
        G = ambient.conformal_christoffels(m, x0, x)
        _, d0, _ = ambient.slice_metric(m, x0, x)
        assert np.array_equal(G[:, 0, 1:, 1:], -0.5 * d0)


def test_slice_metric_positive_definite(rng):
    for kind in ("euclidean_polar", "sphere_polar", "hyperbolic_polar"):
        m = ambient.builtin(kind, 2)
        x0 = rng.uniform(0.05, 1.5, size=200)
        x = np.column_stack([rng.uniform(0.01, np.pi - 0.01, 200), rng.uniform(0, 6, 200)])
        s, _, _ = ambient.slice_metric(m, x0, x)
        assert np.all(np.linalg.eigvalsh(s)[:, 0] > 0)
        assert np.array_equal(s, np.swapaxes(s, 1, 2))


@pytest.mark.parametrize("kind,factor", [
    ("euclidean_polar", lambda r: np.ones_like(r)),
    ("sphere_polar", np.cos),
    ("hyperbolic_polar", np.cosh),
])
def test_convex_reference_hessian(kind, factor):
    m = ambient.builtin(kind, 2)
    chi = ambient.strictly_convex_reference(m)
    r = np.linspace(0.1, 1.4, 30)
    x = np.column_stack([np.full(30, 1.0), np.full(30, 2.0)])
    ev = chi.hessian_eigenvalues(r, x)
    assert np.all(ev > 0)
    assert np.allclose(ev, factor(r)[:, None], rtol=1e-13)


def test_convex_reference_unavailable_for_perturbed_or_custom():
    with pytest.raises(UnsupportedError):
        ambient.strictly_convex_reference(ambient.builtin("euclidean_polar").with_psi("x0"))
    with pytest.raises(UnsupportedError):
        ambient.strictly_convex_reference(ambient.warped("1", 1))
