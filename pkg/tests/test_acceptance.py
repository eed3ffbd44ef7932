"""The twelve acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line, printed in the terminal summary.
Runtimes are measured in-process after the numba kernels are compiled.
"""
from __future__ import annotations

import itertools
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from curvesolve import pipeline
from curvesolve.curvature import make_curvature, principal_curvatures
from curvesolve.errors import ConeViolation
from curvesolve.grid import Grid
from curvesolve.homotopy import smallest_eigenvalue
from curvesolve.hypersurface import embedding_oracle, graph_quantities
from curvesolve.scenario import load

from conftest import SCENARIOS, prepared, record_criterion
from test_curvature import FUNCTIONS, charpoly_roots, cone_samples, random_spd, random_sym

SUITE = ("euclidean_circle", "sphere_circle", "s3_gauss", "euclidean_nonconstant")


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Full pipeline run of every shipped scenario: (artifact, seconds, out dir)."""
    out = {}
    for name in SUITE:
        d = tmp_path_factory.mktemp(name)
        sc = load(SCENARIOS / f"{name}.scenario")
        t0 = time.perf_counter()
        art = pipeline.run(sc, d)
        out[name] = (art, time.perf_counter() - t0, d)
    return out


def _u(art):
    return np.asarray(art["solution"]["u"])


def _reached_one(art):
    return art["trace"]["steps"][-1]["t"] == 1.0


def test_criterion_01_euclidean_circle(runs):
    art, secs, _ = runs["euclidean_circle"]
    b = art["barriers"]
    err = float(np.max(np.abs(_u(art) - 2.0)))
    ok = (abs(b["upper_margin"] - 0.08) <= 1e-12 and abs(b["lower_margin"] - 0.2022222) <= 1e-6
          and _reached_one(art) and err <= 1e-9 and secs <= 2.0)
    record_criterion(1, ok, f"margins {b['upper_margin']:.4f}/{b['lower_margin']:.4f}, "
                            f"max|u-2| = {err:.2e}, {secs:.2f} s")
    assert ok


def test_criterion_02_sphere_circle(runs):
    art, secs, _ = runs["sphere_circle"]
    err = float(np.max(np.abs(_u(art) - np.pi / 4)))
    ok = _reached_one(art) and err <= 1e-9 and secs <= 2.0
    record_criterion(2, ok, f"max|u-pi/4| = {err:.2e}, {secs:.2f} s")
    assert ok


def test_criterion_03_s3_gauss_root(runs):
    art, secs, _ = runs["s3_gauss"]
    sc = load(SCENARIOS / "s3_gauss.scenario")
    err = float(np.max(np.abs(_u(art) - np.pi / 4)))
    ok = ((sc.n_phi, sc.n_theta) == (16, 32) and _reached_one(art) and err <= 1e-6
          and secs <= 60.0)
    record_criterion(3, ok, f"grid {sc.n_phi}x{sc.n_theta}, max|u-pi/4| = {err:.2e}, {secs:.2f} s")
    assert ok


def test_criterion_04_nonconstant_target(runs):
    art, _, _ = runs["euclidean_nonconstant"]
    sc = load(SCENARIOS / "euclidean_nonconstant.scenario")
    setup = pipeline.build_setup(sc)
    u = _u(art)
    grid = setup.grid
    kappa = embedding_oracle(u, grid, setup.ambient)
    s = graph_quantities(setup.ambient, u, grid)
    f = np.real(setup.f(u, grid.nodes, s.nu))
    res = art["trace"]["steps"][-1]["residual"]
    dev = float(np.max(np.abs(kappa - f)))
    inside = bool(np.all(setup.pair.u1 < u) and np.all(u < setup.pair.u2))
    ok = res <= 1e-10 and dev <= 1e-6 and inside
    record_criterion(4, ok, f"residual {res:.2e}, oracle |kappa-f| = {dev:.2e}, inside {inside}")
    assert ok


def test_criterion_05_uniqueness():
    details, ok = [], True
    for name in ("euclidean_circle", "sphere_circle"):
        _, problem, rep = prepared(name)
        m = rep.measured
        good = m["trials"] == 20 and m["converged"] == 20 and m["max_distance"] <= 1e-8
        ok &= good
        details.append(f"{name}: {m['converged']}/20 within {m['max_distance']:.1e}")
    record_criterion(5, ok, "; ".join(details))
    assert ok


def test_criterion_06_regular_point():
    details, ok = [], True
    for name in ("euclidean_circle", "sphere_circle", "s3_gauss"):
        _, problem, _ = prepared(name)
        mu = smallest_eigenvalue(problem)
        shift = smallest_eigenvalue(problem.with_lambda(2 * problem.lam)) - mu
        rel = abs(shift - problem.lam) / problem.lam
        ok &= mu > 0 and rel <= 1e-8
        details.append(f"{name}: mu={mu:.4g}, shift err {rel:.1e}")
    record_criterion(6, ok, "; ".join(details))
    assert ok


def test_criterion_07_jacobian(runs):
    details, ok = [], True
    for name in SUITE:
        art, _, _ = runs[name]
        fd = [d for d in art["diagnostics"] if d["name"] == "jacobian_fd"]
        best = max(d["measured"]["best"] for d in fd)
        ok &= len(fd) == 2 and all(d["passed"] for d in fd) and best <= 1e-6
        details.append(f"{name} {best:.1e}")
    record_criterion(7, ok, "worst relative error (u0 and final): " + ", ".join(details))
    assert ok


def test_criterion_08_curvature_functions():
    rng = np.random.default_rng(8)
    worst = {"euler": 0.0, "concavity": 0.0, "gradient": 0.0}
    ok = True
    for name, n, k in FUNCTIONS:
        F = make_curvature(name, n, k)
        kap = cone_samples(F, 1000, rng)
        val = F.value(kap)
        ok &= all(np.array_equal(F.value(kap[:, p]), val)
                  for p in itertools.permutations(range(n)))
        grad = F.gradient(kap)
        ok &= bool(np.all(grad > 0))
        euler = float(np.max(np.abs(np.sum(grad * kap, 1) - val) / np.maximum(1, np.abs(val))))
        other = cone_samples(F, 1000, rng)
        conc = float(np.max(0.5 * (val + F.value(other)) - F.value(0.5 * (kap + other))))
        # gradient vs central differences at well-interior points
        h = 1e-5
        interior = F.cone_margin(kap) > 0.1 * np.abs(kap).max(axis=1)
        pts = kap[interior]
        fd = np.stack([(F.value(pts + h * e) - F.value(pts - h * e)) / (2 * h)
                       for e in np.eye(n)], axis=1)
        gerr = float(np.max(np.abs(fd - grad[interior]) / np.abs(grad[interior])))
        worst["euler"] = max(worst["euler"], euler)
        worst["concavity"] = max(worst["concavity"], conc)
        worst["gradient"] = max(worst["gradient"], gerr)
        ok &= euler <= 1e-12 and conc <= 1e-12 and gerr <= 1e-6
        if name != "mean":
            margin = F.cone_margin(kap)
            prev = None
            for delta in (1e-1, 1e-4, 1e-7, 1e-10):
                near = F.value(kap - (margin * (1 - delta))[:, None])
                ok &= prev is None or bool(np.all(near < prev))
                prev = near
            ok &= bool(np.all(prev <= 2e-3 * np.abs(kap).max(axis=1)))
            try:
                F.value(kap[:1] - margin[:1, None] - 1e-9)
                ok = False
            except ConeViolation:
                pass
    record_criterion(8, ok, f"{len(FUNCTIONS)} functions x 1000 samples; euler "
                            f"{worst['euler']:.1e}, concavity {worst['concavity']:.1e}, "
                            f"gradient {worst['gradient']:.1e}")
    assert ok


def test_criterion_09_minmax():
    rng = np.random.default_rng(9)
    shift_err, oracle_err, mono = 0.0, 0.0, True
    for _ in range(100):
        h, g = random_sym(rng, 5), random_spd(rng, 5)
        s = rng.uniform(-2, 2)
        k0 = principal_curvatures(h, g).kappa
        shift_err = max(shift_err, float(np.max(np.abs(
            principal_curvatures(h + s * g, g).kappa - k0 - s))))
        d = rng.normal(size=(5, 3))
        k1 = charpoly_roots(h + d @ d.T, g)
        oracle_err = max(oracle_err, float(np.max(np.abs(k0 - charpoly_roots(h, g)))))
        mono &= bool(np.all(k1 >= k0 - 1e-8))
        mono &= bool(np.all(principal_curvatures(h + d @ d.T, g).kappa >= k0 - 1e-12))
    ok = shift_err <= 1e-10 and oracle_err <= 1e-8 and mono
    record_criterion(9, ok, f"100 pencils; shift {shift_err:.1e}, oracle {oracle_err:.1e}, "
                            f"monotone {mono}")
    assert ok


def test_criterion_10_convergence_order():
    from curvesolve import ambient
    m = ambient.builtin("euclidean_polar", 1)
    errs = []
    for n in (64, 128, 256):
        g = Grid(1, n)
        u = 2 + 0.1 * np.cos(g.theta)
        errs.append(float(np.max(np.abs(graph_quantities(m, u, g).kappa[:, 0]
                                        - embedding_oracle(u, g, m)))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = bool(np.all(orders >= 3.7))
    record_criterion(10, ok, "errors " + ", ".join(f"{e:.2e}" for e in errs)
                     + "; orders " + ", ".join(f"{o:.2f}" for o in orders))
    assert ok


def test_criterion_11_monitors(runs, tmp_path):
    n_steps, ok = 0, True
    for name in SUITE:
        art, _, _ = runs[name]
        caps = art["monitor_caps"]
        for s in art["trace"]["steps"] + art["trace"]["arclength"]:
            n_steps += 1
            ok &= (s["monitor_min_barrier_gap"] > 0 and s["max_graddsq"] < caps["grad_cap"]
                   and s["max_kappa"] < caps["kappa_cap"])
    proc = subprocess.run([sys.executable, "-m", "curvesolve.cli", "run",
                           str(SCENARIOS / "fixtures" / "monitor_violation.scenario"),
                           "--out", str(tmp_path / "viol")], capture_output=True, text=True)
    ok &= proc.returncode == 4
    record_criterion(11, ok, f"{n_steps} accepted steps strictly inside all bounds; "
                             f"violation fixture exit {proc.returncode}")
    assert ok


def test_criterion_12_resume(runs, tmp_path):
    details, ok = [], True
    for name in ("euclidean_circle", "s3_gauss"):
        art, _, d = runs[name]
        copy = tmp_path / name
        shutil.copytree(d / pipeline.CHECKPOINT_DIR, copy / pipeline.CHECKPOINT_DIR)
        ckpts = sorted((copy / pipeline.CHECKPOINT_DIR).iterdir())
        mid = ckpts[len(ckpts) // 2]
        again = pipeline.resume(mid)
        same = (again["checksum"] == art["checksum"]
                and (copy / pipeline.ARTIFACT_NAME).read_bytes()
                == (d / pipeline.ARTIFACT_NAME).read_bytes())
        ok &= same
        details.append(f"{name} from {mid.name}: {'identical' if same else 'DIFFERENT'}")
    record_criterion(12, ok, "; ".join(details))
    assert ok
