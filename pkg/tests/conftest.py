from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from curvesolve import ambient, kernels
from curvesolve.grid import Grid

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernels():
    kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid256():
    return Grid(1, 256)


@pytest.fixture(scope="session")
def grid_s2():
    return Grid(2, 32, 16)


@pytest.fixture(scope="session")
def euclid():
    return ambient.builtin("euclidean_polar", 1)


@pytest.fixture(scope="session")
def sphere():
    return ambient.builtin("sphere_polar", 1)


@pytest.fixture(scope="session")
def hyperbolic():
    return ambient.builtin("hyperbolic_polar", 1)


@pytest.fixture(scope="session")
def s3():
    return ambient.builtin("sphere_polar", 2)


_PREPARED = {}


def prepared(name: str):
    """``(setup, problem, uniqueness report)`` for a shipped scenario, built once."""
    if name not in _PREPARED:
        from curvesolve import pipeline
        from curvesolve.scenario import load

        setup = pipeline.build_setup(load(SCENARIOS / f"{name}.scenario"))
        problem, rep = pipeline.build_problem(setup)
        _PREPARED[name] = (setup, problem, rep)
    return _PREPARED[name]


ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
