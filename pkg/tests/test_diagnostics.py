from __future__ import annotations

import json

import numpy as np
import pytest

from curvesolve import ambient
from curvesolve.diagnostics import (DiagnosticReport, c2_monitor, coercivity_check,
                                    jacobian_fd_check, random_start, smooth_noise,
                                    uniqueness_experiment)
from curvesolve.grid import Grid

from conftest import prepared


def test_c2_monitor_examples(euclid, sphere, grid256):
    mon = c2_monitor(np.full(256, 2.0), euclid, grid256)
    assert np.allclose(mon.w, np.log(0.5) + 2.0, atol=1e-12)
    assert mon.max == pytest.approx(1.3069, abs=1e-4)
    for mu in (1.0, 2.5):
        mon = c2_monitor(np.full(256, np.pi / 4), sphere, grid256, mu_w=mu)
        assert mon.max == pytest.approx(-np.cos(np.pi / 4) * mu, abs=1e-12)


def test_c2_monitor_inflation_probe(euclid, grid256):
    small = c2_monitor(np.full(256, 2.0), euclid, grid256, mu_w=0.0)
    big = c2_monitor(np.full(256, 2.2), euclid, grid256, mu_w=0.0)
    assert big.max == pytest.approx(np.log(1 / 2.2), abs=1e-12)
    assert big.max < small.max


def test_c2_monitor_undefined_nodes():
    flat = ambient.warped("1", 1)
    g = Grid(1, 32)
    mon = c2_monitor(np.ones(32), flat, g, chi=lambda x0: 0.5 * x0**2)
    assert not mon.defined.any() and np.isnan(mon.max)


def test_smooth_noise(rng, grid_s2):
    for g in (Grid(1, 64), grid_s2):
        w = smooth_noise(g, rng)
        assert np.max(np.abs(w)) == pytest.approx(1.0)


def test_random_starts_are_admissible(rng):
    _, problem, _ = prepared("s3_gauss")
    for _ in range(5):
        u = random_start(problem, rng)
        assert np.all(problem.u1 < u) and np.all(u < problem.u2)
        problem.F.value(problem.state(u).kappa)


@pytest.mark.parametrize("name", ["euclidean_circle", "sphere_circle"])
def test_uniqueness(name):
    _, problem, rep = prepared(name)
    assert rep.passed and rep.measured["converged"] == 20
    again = uniqueness_experiment(problem, 20, seed=0)
    assert again.measured == rep.measured
    assert again.measured["max_distance"] <= 1e-8


def test_uniqueness_below_lambda0_is_recorded():
    _, problem, _ = prepared("euclidean_circle")
    rep = uniqueness_experiment(problem.with_lambda(0.1), 4, seed=1)
    assert isinstance(rep.passed, bool) and rep.measured["trials"] == 4


def test_uniqueness_zero_trials():
    _, problem, _ = prepared("euclidean_circle")
    rep = uniqueness_experiment(problem, 0)
    assert rep.passed and rep.measured["converged"] == 0


def test_coercivity_monotone_in_lambda():
    _, problem, _ = prepared("euclidean_circle")
    rep = coercivity_check(problem)
    assert rep.passed
    assert rep.measured["c_emp"] == pytest.approx(problem.lam - rep.measured["mu_min"])
    mus = [coercivity_check(problem.with_lambda(lam)).measured["mu_min"] for lam in (8, 16, 32)]
    assert mus[0] < mus[1] < mus[2]


@pytest.mark.parametrize("name", ["euclidean_circle", "sphere_circle", "s3_gauss",
                                  "euclidean_nonconstant"])
def test_jacobian_fd(name):
    _, problem, _ = prepared(name)
    rep = jacobian_fd_check(problem.u0, 0.0, problem)
    assert rep.passed and rep.measured["best"] <= 1e-6


def test_jacobian_fd_v_curve():
    _, problem, _ = prepared("euclidean_circle")
    errs = jacobian_fd_check(problem.u0, 0.5, problem).measured["errors"]
    assert errs["1e-06"] < errs["0.0001"] and errs["1e-06"] < errs["1e-08"]


def test_jacobian_fault_injection():
    _, problem, _ = prepared("euclidean_circle")

    def flipped(u, t):
        J = problem.jacobian(u, t).tolil()
        J[3, 3] = -J[3, 3]
        return J.tocsr()
    rep = jacobian_fd_check(problem.u0, 0.0, problem, jacobian=flipped)
    assert not rep.passed and rep.measured["best"] > 1e-3


def test_report_serialization():
    rep = DiagnosticReport("x", True, {"a": np.float64(1.5), "b": np.inf, "c": [np.int64(2)],
                                       "d": np.bool_(True)}, "sc", 3)
    d = json.loads(json.dumps(rep.to_dict(), allow_nan=False))
    assert d["measured"] == {"a": 1.5, "b": None, "c": [2], "d": True}
    text = rep.text()
    assert text.startswith("[x]\nstatus = PASS\nscenario = sc\nseed = 3\n")
