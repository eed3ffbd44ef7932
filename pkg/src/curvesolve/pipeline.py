"""Scenario -> validated barriers -> particular problem -> path -> artifact."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import ambient as amb
from .barriers import BarrierPair, BarrierReport, monitor_caps, validate
from .continuation import ContinuationTrace, PathState, Schedule, continue_path
from .curvature import CurvatureFunction, make_curvature
from .diagnostics import (DiagnosticReport, c2_monitor, coercivity_check, jacobian_fd_check,
                          uniqueness_experiment)
from .errors import ConfigurationError, RhsBoundsError, UnsupportedError
from .grid import Grid
from .homotopy import HomotopyProblem, estimate_lambda0, make_problem
from .hypersurface import graph_quantities
from .rhs import RightHandSide, clamp_rhs, sample_bounds
from .scenario import Scenario, parse, serialize
from .tubular import ExpressionGraph, LevelFoliation, build_foliation_adaptive

log = logging.getLogger(__name__)

ARTIFACT_NAME = "artifact.json"
TRACE_NAME = "trace.tsv"
CHECKPOINT_DIR = "checkpoints"
EXPORTS = ("solution", "residual_history", "curvature_profile")


@dataclass
class Setup:
    scenario: Scenario
    ambient: amb.AmbientManifold
    grid: Grid
    F: CurvatureFunction
    f: RightHandSide
    pair: BarrierPair
    barrier_report: BarrierReport
    foliation: LevelFoliation
    grad_cap: float
    kappa_cap: float


def build_ambient(sc: Scenario) -> amb.AmbientManifold:
    lo = -math.inf if sc.x0_min is None else sc.x0_min
    hi = math.inf if sc.x0_max is None else sc.x0_max
    if sc.ambient_kind == "warped":
        if sc.warp is None:
            raise ConfigurationError("ambient.kind = warped needs ambient.warp")
        m = amb.warped(sc.warp, sc.dim_n, (lo, hi), sc.chi)
    else:
        m = amb.builtin(sc.ambient_kind, sc.dim_n)
        if sc.chi is not None:
            m = replace(m, chi=amb.RadialFunction.from_expression(sc.chi))
        if sc.x0_min is not None or sc.x0_max is not None:
            blo, bhi = m.x0_range
            m = replace(m, x0_range=(max(lo, blo), min(hi, bhi)))
    if sc.psi is not None:
        m = m.with_psi(sc.psi)
    return m


def build_setup(sc: Scenario) -> Setup:
    """Everything that precedes the solve; raises on invalid barriers."""
    try:
        m = build_ambient(sc)
        grid = Grid(sc.dim_n, sc.n_theta, sc.n_phi)
        F = make_curvature(sc.curvature, sc.dim_n, sc.curvature_k)
    except UnsupportedError as exc:
        raise ConfigurationError(str(exc)) from None
    f = RightHandSide(sc.f, sc.dim_n, sc.c1, sc.c2)
    if sc.clamp:
        f = clamp_rhs(f, sc.c1, sc.c2)
    u1 = ExpressionGraph(sc.u1, sc.dim_n).nodal(grid) * np.ones(grid.size)
    u2 = ExpressionGraph(sc.u2, sc.dim_n).nodal(grid) * np.ones(grid.size)
    pair = BarrierPair(u1, u2, sc.epsilon1)
    report = validate(pair, m, grid, F, f, slack=sc.slack)
    if sc.c1 is not None and sc.c2 is not None and not sc.clamp:
        lo, hi = sample_bounds(f, m, u1, u2, grid.nodes, seed=sc.seed)
        if lo < sc.c1 or hi > sc.c2:
            raise RhsBoundsError(f"sampled f in [{lo:.6g}, {hi:.6g}] leaves [c1, c2] = "
                                 f"[{sc.c1:.6g}, {sc.c2:.6g}]")
    grad_cap, kappa_cap = monitor_caps(m, grid, u1, u2)
    if sc.grad_cap is not None:
        grad_cap = sc.grad_cap
    if sc.kappa_cap is not None:
        kappa_cap = sc.kappa_cap
    eps0 = sc.eps0 if sc.eps0 is not None else 0.05 * float(np.min(u2 - u1))
    fol = build_foliation_adaptive(m, sc.u2, eps0, sc.n_levels, grid)
    return Setup(sc, m, grid, F, f, pair, report, fol, grad_cap, kappa_cap)


def problem_factory(setup: Setup, tau0=None):
    def factory(lam):
        return make_problem(setup.foliation, setup.F, setup.f, setup.pair.u1,
                            setup.pair.epsilon1, lam, tau0=tau0, grad_cap=setup.grad_cap,
                            kappa_cap=setup.kappa_cap)
    return factory


def build_problem(setup: Setup):
    """``(problem, uniqueness report or None)`` honoring ``homotopy.lambda = auto``."""
    sc = setup.scenario
    factory = problem_factory(setup, sc.tau0)
    if sc.lam is None:
        _, problem, rep = estimate_lambda0(factory, sc.uniqueness_trials, sc.seed)
        return problem, rep
    return factory(sc.lam), None


def schedule_for(sc: Scenario) -> Schedule:
    return Schedule(dt0=sc.dt0, dt_min=sc.dt_min, tol=sc.tol, final_tol=min(sc.tol, 1e-10),
                    max_steps=sc.max_steps)


def pre_diagnostics(setup: Setup, problem: HomotopyProblem, uniq) -> list:
    sc = setup.scenario
    reports = []
    if uniq is None and sc.uniqueness_trials > 0:
        uniq = uniqueness_experiment(problem, sc.uniqueness_trials, sc.seed)
    if uniq is not None:
        reports.append(uniq)
    if sc.coercivity:
        reports.append(coercivity_check(problem))
    if sc.jacobian_check:
        reports.append(jacobian_fd_check(problem.u0, 0.0, problem, sc.seed))
    for r in reports:
        r.scenario, r.seed = sc.name, sc.seed
    return [r.to_dict() for r in reports]


def _c2_value(setup: Setup, u):
    sc = setup.scenario
    if not sc.c2_monitor:
        return None
    try:
        mon = c2_monitor(u, setup.ambient, setup.grid, sc.lambda_w, sc.mu_w)
    except UnsupportedError:
        return None
    return None if np.isnan(mon.max) else mon.max


# -- persistence -----------------------------------------------------------------


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the same directory and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False)


def content_checksum(payload: dict) -> str:
    body = {k: v for k, v in payload.items() if k != "checksum"}
    return hashlib.sha256(_dumps(body).encode()).hexdigest()


def _floats(a) -> list:
    return [float(x) for x in np.ravel(a)]


def _checkpoint_payload(sc_text, problem, pre, c2_max, state: PathState, index: int) -> dict:
    payload = {
        "kind": "checkpoint", "version": __version__, "scenario": sc_text,
        "lambda": problem.lam, "tau0": problem.tau0, "pre_diagnostics": pre,
        "c2_max": c2_max, "step": index,
        "state": {"u": _floats(state.u), "t": state.t, "dt": state.dt,
                  "streak": state.streak, "trace": state.trace.to_dict()},
    }
    payload["checksum"] = content_checksum(payload)
    return payload


def load_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from None
    if data.get("checksum") != content_checksum(data):
        raise ConfigurationError(f"{path}: checksum mismatch (file corrupted?)")
    return data


# -- run / resume ---------------------------------------------------------------


def _solve(setup: Setup, problem: HomotopyProblem, pre: list, out, state=None, c2_max=None,
           progress=None) -> dict:
    sc = setup.scenario
    sc_text = serialize(sc)
    out = Path(out) if out is not None else None
    box = {"c2": c2_max}

    def on_step(st: PathState):
        w = _c2_value(setup, st.u)
        if w is not None:
            box["c2"] = w if box["c2"] is None else max(box["c2"], w)
        index = len(st.trace.steps) - 1
        if out is not None:
            atomic_write(out / CHECKPOINT_DIR / f"ckpt_{index:04d}.json",
                         _dumps(_checkpoint_payload(sc_text, problem, pre, box["c2"], st, index)))
        if progress:
            s = st.trace.steps[-1]
            progress(f"step {index}: t={s.t:.6f} dt={s.dt:.3g} iters={s.iters} "
                     f"residual={s.residual:.3e}")

    u, trace = continue_path(problem, schedule_for(sc), state=state, on_step=on_step)
    post = []
    if sc.jacobian_check:
        post.append(jacobian_fd_check(u, 1.0, problem, sc.seed))
    consts = trace.newton_constants
    post.append(DiagnosticReport("quadratic_tail", all(c <= 1e6 for c in consts),
                                 {"max_constant": max(consts) if consts else 0.0}))
    if box["c2"] is not None:
        post.append(DiagnosticReport("c2_monitor", True, {"max_w": box["c2"],
                                     "lambda_w": sc.lambda_w, "mu_w": sc.mu_w}))
    for r in post:
        r.scenario, r.seed = sc.name, sc.seed
    s = graph_quantities(setup.ambient, u, setup.grid)
    rep = setup.barrier_report
    artifact = {
        "kind": "artifact", "version": __version__, "scenario": sc_text,
        "lambda": problem.lam, "tau0": problem.tau0,
        "barriers": {"upper_margin": rep.upper_margin,
                     "lower_margin": rep.lower_margin if np.isfinite(rep.lower_margin) else None,
                     "sigma_size": int(rep.sigma_nodes.size), "nodes": rep.node_count},
        "monitor_caps": {"grad_cap": problem.grad_cap, "kappa_cap": problem.kappa_cap},
        "trace": trace.to_dict(),
        "trace_checksum": trace.checksum(),
        "solution": {"dim_n": setup.grid.dim_n,
                     "nodes": [_floats(x) for x in setup.grid.nodes.T],
                     "u": _floats(u), "kappa": [_floats(k) for k in s.kappa.T]},
        "diagnostics": pre + [r.to_dict() for r in post],
    }
    artifact["checksum"] = content_checksum(artifact)
    if out is not None:
        atomic_write(out / ARTIFACT_NAME, _dumps(artifact))
        atomic_write(out / TRACE_NAME, trace.table())
    return artifact


def run(sc: Scenario, out=None, progress=None) -> dict:
    setup = build_setup(sc)
    problem, uniq = build_problem(setup)
    pre = pre_diagnostics(setup, problem, uniq)
    return _solve(setup, problem, pre, out, progress=progress)


def run_file(path, out=None, progress=None, seed=None, grid_n=None) -> dict:
    from .scenario import load
    sc = load(path)
    if seed is not None:
        sc = sc.with_seed(seed)
    if grid_n is not None:
        sc = sc.with_grid(grid_n)
    return run(sc, out, progress)


def resume(checkpoint_path, out=None, progress=None) -> dict:
    """Continue from a checkpoint; the result matches the uninterrupted run."""
    ck = load_json(checkpoint_path)
    if ck.get("kind") != "checkpoint":
        raise ConfigurationError(f"{checkpoint_path} is not a checkpoint")
    sc = parse(ck["scenario"], str(checkpoint_path))
    if out is None:
        out = Path(checkpoint_path).resolve().parent.parent
    setup = build_setup(sc)
    problem = problem_factory(setup, ck["tau0"])(ck["lambda"])
    st = ck["state"]
    state = PathState(np.array(st["u"], dtype=float), st["t"], st["dt"], st["streak"],
                      ContinuationTrace.from_dict(st["trace"]))
    return _solve(setup, problem, ck["pre_diagnostics"], out, state=state, c2_max=ck["c2_max"],
                  progress=progress)


def diagnose(sc: Scenario) -> list[DiagnosticReport]:
    setup = build_setup(sc)
    problem, uniq = build_problem(setup)
    reports = [DiagnosticReport(**d) for d in pre_diagnostics(setup, problem, uniq)]
    if sc.jacobian_check:
        rep = jacobian_fd_check(problem.u0, 1.0, problem, sc.seed)
        rep.name = "jacobian_fd_t1"
        reports.append(rep)
    w = _c2_value(setup, problem.u0)
    if w is not None:
        reports.append(DiagnosticReport("c2_monitor_u0", True, {"max_w": w}))
    for r in reports:
        r.scenario, r.seed = sc.name, sc.seed
    return reports


# -- exports -----------------------------------------------------------------------


def export_plotdata(artifact: dict, what: str) -> str:
    """Columnar text with a one-line header."""
    if what not in EXPORTS:
        raise ConfigurationError(f"unknown export {what!r}; choose from {', '.join(EXPORTS)}")
    sol = artifact["solution"]
    names = ["theta"] if sol["dim_n"] == 1 else ["phi", "theta"]
    if what == "residual_history":
        header = ["t", "residual"]
        rows = [(s["t"], s["residual"]) for s in artifact["trace"]["steps"]]
    elif what == "solution":
        header = names + ["u"]
        rows = zip(*sol["nodes"], sol["u"])
    else:
        header = names + [f"kappa{i + 1}" for i in range(sol["dim_n"])]
        rows = zip(*sol["nodes"], *sol["kappa"])
    lines = ["\t".join(header)] + ["\t".join(repr(float(v)) for v in row) for row in rows]
    return "\n".join(lines) + "\n"
