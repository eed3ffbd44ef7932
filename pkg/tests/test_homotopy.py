from __future__ import annotations

import numpy as np
import pytest

from curvesolve import ambient
from curvesolve.curvature import make_curvature
from curvesolve.diagnostics import smooth_noise
from curvesolve.errors import ConeViolation, ConfigurationError, ParticularSolutionError
from curvesolve.grid import Grid
from curvesolve.homotopy import (HomotopyProblem, build_particular, estimate_lambda0,
                                 make_problem, newton_solve, sandwich_ok, smallest_eigenvalue)
from curvesolve.rhs import RightHandSide
from curvesolve.tubular import build_foliation

from conftest import prepared


@pytest.fixture(scope="module")
def circle3(euclid):
    g = Grid(1, 64)
    fol = build_foliation(euclid, "3", 0.1, 3, g)
    return fol, make_curvature("mean", 1), RightHandSide("2/x0^2", 1)


def test_particular_solution_example(circle3):
    fol, F, f = circle3
    u0, F0, tau0 = build_particular(fol, F, f, 50.0, tau0=-0.001)
    assert tau0 == -0.001
    assert np.max(np.abs(u0 - 2.999)) <= 1e-12
    assert np.max(np.abs(F0 - 1 / 2.999)) <= 1e-10
    assert F0[0] == pytest.approx(0.333445, abs=1e-6)
    f0 = F0 + 50.0 * (u0 - 2.0)
    assert np.max(np.abs(f0 - 50.283445)) <= 1e-6


def test_sandwich_arithmetic():
    ok = sandwich_ok(np.array([1 / 2.999]), np.array([1 / 3]), np.array([2.999]),
                     np.array([3.0]), 50.0)
    assert ok.all()
    bad = sandwich_ok(np.array([1 / 2.95]), np.array([1 / 3]), np.array([2.95]),
                      np.array([3.0]), 50.0)
    assert not bad.any()


def test_rejected_offset_and_search(circle3):
    fol, F, f = circle3
    with pytest.raises(ParticularSolutionError):
        build_particular(fol, F, f, 50.0, tau0=-0.05)
    u0, F0, tau0 = build_particular(fol, F, f, 50.0)
    assert -fol.eps0 < tau0 < 0
    mid = F0 + 50.0 * (u0 - 3.0)
    assert np.all(0.5 * F0 <= mid) and np.all(mid <= 1 / 3 + 1e-12)
    with pytest.raises(ConfigurationError):
        build_particular(fol, F, f, -1.0)


def test_residual_values():
    _, problem, _ = prepared("euclidean_circle")
    n = problem.grid.size
    assert np.max(np.abs(problem.residual(np.full(n, 2.0), 1.0))) <= 1e-12
    assert np.max(np.abs(problem.residual(np.full(n, 2.5), 1.0) - 0.08)) <= 1e-12
    assert np.max(np.abs(problem.residual(problem.u0, 0.0))) <= 1e-10
    assert np.all(problem.u1 < problem.u0) and np.all(problem.u0 < problem.u2)


@pytest.mark.parametrize("name", ["euclidean_circle", "euclidean_nonconstant", "s3_gauss"])
def test_residual_is_affine_in_t(name, rng):
    _, problem, _ = prepared(name)
    u = problem.u0 + 0.005 * smooth_noise(problem.grid, rng)
    r0, r1 = problem.residual(u, 0.0), problem.residual(u, 1.0)
    for t in rng.uniform(0, 1, 5):
        assert np.max(np.abs(problem.residual(u, t) - ((1 - t) * r0 + t * r1))) <= 1e-12


def test_newton_from_perturbation(rng):
    _, problem, _ = prepared("euclidean_circle")
    u = problem.u0 + 1e-3 * rng.uniform(-1, 1, problem.grid.size)
    res = newton_solve(u, 0.0, problem, 1e-11)
    assert res.iterations <= 6
    assert np.max(np.abs(res.u - problem.u0)) <= 1e-9
    assert res.quadratic_constant() <= 1e6


def test_newton_warm_start():
    _, problem, _ = prepared("euclidean_circle")
    res = newton_solve(np.full(problem.grid.size, 2.2), 1.0, problem, 1e-11)
    assert np.max(np.abs(res.u - 2.0)) <= 1e-9


def test_newton_rejects_inadmissible_start():
    _, problem, _ = prepared("s3_gauss")
    ph = problem.grid.nodes[:, 0]
    dent = np.pi / 4 - 0.3 * np.exp(-(ph / 0.35) ** 2)
    with pytest.raises(ConeViolation) as info:
        newton_solve(dent, 0.0, problem, 1e-10)
    assert len(info.value.nodes) > 0


@pytest.mark.parametrize("name", ["euclidean_circle", "sphere_circle", "s3_gauss"])
def test_lambda_shift_moves_spectrum(name):
    _, problem, _ = prepared(name)
    mu = smallest_eigenvalue(problem)
    assert mu > 0
    mu2 = smallest_eigenvalue(problem.with_lambda(problem.lam + 10.0))
    assert mu2 - mu == pytest.approx(10.0, rel=1e-8)


def test_ellipticity_coefficients():
    _, problem, _ = prepared("s3_gauss")
    op = problem.linearize(problem.u0, 0.0)
    assert np.all(np.linalg.eigvalsh(op.a) > 0)
    eta = np.cos(problem.grid.nodes[:, 0])
    assert np.array_equal(op.apply(eta), op.matrix @ eta)


def _slab_problem(lam, n=64, level=1.0):
    m = ambient.warped("1", 1)
    g = Grid(1, n)
    u0 = np.full(n, level)
    return HomotopyProblem(m, g, make_curvature("mean", 1), RightHandSide("1", 1),
                           np.full(n, level - 0.5), np.full(n, level + 0.5), 0.1, lam, u0,
                           np.zeros(n))


def test_flat_slab_spectrum():
    lam = 8.0
    p = _slab_problem(lam)
    ev = np.sort(np.linalg.eigvals(p.jacobian(p.u0, 0.0).toarray()).real)
    h = p.grid.h_theta
    k = np.fft.fftfreq(p.grid.size, 1 / p.grid.size)
    symbol = (30 - 32 * np.cos(k * h) + 2 * np.cos(2 * k * h)) / (12 * h * h)
    assert np.max(np.abs(ev - np.sort(lam + symbol))) <= 1e-9
    assert ev[0] == pytest.approx(lam, abs=1e-10)
    # the low modes follow lambda + k^2
    assert ev[1] == pytest.approx(lam + 1, rel=1e-4)


def test_flat_slab_lambda0():
    lam, problem, rep = estimate_lambda0(_slab_problem, trials=5)
    assert lam == 8.0 and rep.passed


def test_lambda0_of_shipped_scenarios():
    for name in ("euclidean_circle", "sphere_circle", "s3_gauss"):
        _, problem, rep = prepared(name)
        assert problem.lam <= 64 and rep.passed


def test_lambda_search_exhausted(circle3):
    def factory(lam):
        raise ParticularSolutionError("never")
    with pytest.raises(ConfigurationError):
        estimate_lambda0(factory, trials=1)


def test_make_problem_explicit(circle3):
    fol, F, f = circle3
    p = make_problem(fol, F, f, np.full(64, 1.5), 0.02, 50.0, tau0=-0.001)
    assert p.tau0 == -0.001 and p.lam == 50.0
    assert np.max(np.abs(p.f0(2.0) - 50.283445)) <= 1e-6
