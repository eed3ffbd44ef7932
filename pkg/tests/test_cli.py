from __future__ import annotations

import json
import os
import shutil
import subprocess
import sys

import pytest

from curvesolve import cli, errors
from curvesolve.pipeline import load_json

from conftest import SCENARIOS


def curvesolve(*args, env=None, cwd=None):
    full = dict(os.environ, **(env or {}))
    return subprocess.run([sys.executable, "-m", "curvesolve.cli", *map(str, args)],
                          capture_output=True, text=True, env=full, cwd=cwd, timeout=600)


@pytest.fixture(scope="module")
def euclid_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "euclid"
    proc = curvesolve("run", SCENARIOS / "euclidean_circle.scenario", "--out", out)
    assert proc.returncode == 0, proc.stderr
    return out, proc


def test_run_outputs(euclid_run):
    out, proc = euclid_run
    assert proc.stdout.splitlines()[-1].startswith("done: t=1.0")
    art = load_json(out / "artifact.json")
    assert art["trace"]["steps"][-1]["t"] == 1.0
    assert all(d["passed"] for d in art["diagnostics"])
    assert (out / "trace.tsv").read_text().splitlines()[0].split("\t")[0] == "t"
    assert sorted(p.name for p in (out / "checkpoints").iterdir())[0] == "ckpt_0000.json"


@pytest.mark.parametrize("what,header", [("solution", "theta\tu"),
                                         ("residual_history", "t\tresidual"),
                                         ("curvature_profile", "theta\tkappa1")])
def test_export(euclid_run, tmp_path, what, header):
    out, _ = euclid_run
    proc = curvesolve("export", out / "artifact.json", "--what", what)
    assert proc.returncode == 0 and proc.stdout.startswith(header + "\n")
    target = tmp_path / f"{what}.tsv"
    assert curvesolve("export", out / "artifact.json", "--what", what, "--out",
                      target).returncode == 0
    assert target.read_text() == proc.stdout


def test_resume_is_bitwise(euclid_run, tmp_path):
    out, _ = euclid_run
    copy = tmp_path / "copy"
    shutil.copytree(out / "checkpoints", copy / "checkpoints")
    ckpts = sorted((copy / "checkpoints").iterdir())
    proc = curvesolve("resume", ckpts[len(ckpts) // 2])
    assert proc.returncode == 0, proc.stderr
    assert (copy / "artifact.json").read_bytes() == (out / "artifact.json").read_bytes()


def test_corrupted_artifact_is_rejected(euclid_run, tmp_path):
    out, _ = euclid_run
    art = json.loads((out / "artifact.json").read_text())
    art["lambda"] = 9.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(art))
    proc = curvesolve("export", bad, "--what", "solution")
    assert proc.returncode != 0 and "checksum" in proc.stderr


def test_exit_code_barrier(tmp_path):
    proc = curvesolve("run", SCENARIOS / "fixtures" / "ordering_error.scenario", "--out",
                      tmp_path / "o")
    assert proc.returncode == 3 and "OrderingError" in proc.stderr


def test_exit_code_monitor(tmp_path):
    proc = curvesolve("run", SCENARIOS / "fixtures" / "monitor_violation.scenario", "--out",
                      tmp_path / "o")
    assert proc.returncode == 4 and "MonitorError" in proc.stderr
    assert "curvature" in proc.stderr


def test_exit_code_parse(tmp_path):
    bad = tmp_path / "bad.scenario"
    bad.write_text("name = bad\nambient.kind = torus\n")
    proc = curvesolve("run", bad, "--out", tmp_path / "o")
    assert proc.returncode == 2 and proc.stderr.startswith("error: ")
    bad.write_text("nonsense\n")
    assert curvesolve("run", bad, "--out", tmp_path / "o").returncode == 2


def test_exit_code_mapping():
    assert cli.exit_code(errors.ScenarioParseError("x")) == 2
    assert cli.exit_code(errors.RhsBoundsError("x")) == 3
    assert cli.exit_code(errors.FoliationError("x")) == 4
    assert cli.exit_code(errors.PathError("x")) == 4
    assert cli.exit_code(ValueError("x")) == 1


def test_numpy_backend_matches(euclid_run, tmp_path):
    out, _ = euclid_run
    proc = curvesolve("run", SCENARIOS / "euclidean_circle.scenario", "--out", tmp_path / "np",
                      env={"CURVESOLVE_NUMBA": "0"})
    assert proc.returncode == 0, proc.stderr
    a = load_json(out / "artifact.json")
    b = load_json(tmp_path / "np" / "artifact.json")
    assert max(abs(x - y) for x, y in zip(a["solution"]["u"], b["solution"]["u"])) <= 1e-12


def test_diagnose_and_overrides(tmp_path):
    target = tmp_path / "diag.txt"
    proc = curvesolve("diagnose", SCENARIOS / "euclidean_circle.scenario", "--seed", "3",
                      "--grid-n", "128", "--out", target)
    assert proc.returncode == 0, proc.stderr
    text = target.read_text()
    assert text == proc.stdout
    assert "[uniqueness]" in text and "[coercivity]" in text and "seed = 3" in text
    assert "status = FAIL" not in text


def test_suite(tmp_path):
    proc = curvesolve("suite", SCENARIOS / "fixtures", "--workers", "2", "--out", tmp_path)
    assert proc.returncode == 4
    lines = dict(line.split("\t")[:2] for line in proc.stdout.splitlines())
    assert lines == {"monitor_violation.scenario": "exit=4", "ordering_error.scenario": "exit=3"}
    assert curvesolve("suite", tmp_path / "empty").returncode == 2


def test_log_levels_go_to_stderr(tmp_path):
    proc = curvesolve("run", SCENARIOS / "euclidean_circle.scenario", "--out", tmp_path / "o",
                      env={"CURVESOLVE_LOG": "info"})
    assert proc.returncode == 0
    assert "INFO" in proc.stderr and "INFO" not in proc.stdout
