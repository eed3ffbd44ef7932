"""Scenario files: flat ``section.key = value`` text.

Grammar (one entry per line)::

    line    := blank | comment | entry
    comment := '#' any text
    entry   := key '=' value
    key     := name ('.' name)*        e.g. ambient.kind, homotopy.lambda
    value   := everything after the first '=', stripped of surrounding blanks

Keys are case-sensitive; unknown or repeated keys are errors.  Values are
typed by key (integer, real, boolean ``true``/``false``, ``auto``, or an
expression string).  ``serialize`` writes every key in a fixed order with
reals in round-trip form, so ``parse(serialize(s)) == s``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ScenarioParseError

AUTO = "auto"


def _real(v: str) -> float:
    return float(v)


def _opt_real(v: str):
    return None if v == AUTO else float(v)


def _int(v: str) -> int:
    return int(v)


def _bool(v: str) -> bool:
    if v not in ("true", "false"):
        raise ValueError(f"expected true or false, got {v!r}")
    return v == "true"


def _text(v: str) -> str:
    if not v:
        raise ValueError("empty value")
    return v


def _opt_text(v: str):
    return None if v in ("", "none") else v


def _opt_int(v: str):
    return None if v == AUTO else int(v)


def _fmt(value) -> str:
    if value is None:
        return AUTO
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (attribute, parser); the order here is the serialization order
SCHEMA = {
    "name": ("name", _text),
    "seed": ("seed", _int),
    "ambient.kind": ("ambient_kind", _text),
    "ambient.dim_n": ("dim_n", _int),
    "ambient.warp": ("warp", _opt_text),
    "ambient.psi": ("psi", _opt_text),
    "ambient.chi": ("chi", _opt_text),
    "ambient.x0_min": ("x0_min", _opt_real),
    "ambient.x0_max": ("x0_max", _opt_real),
    "curvature.kind": ("curvature", _text),
    "curvature.k": ("curvature_k", _opt_int),
    "rhs.f": ("f", _text),
    "rhs.c1": ("c1", _opt_real),
    "rhs.c2": ("c2", _opt_real),
    "rhs.clamp": ("clamp", _bool),
    "barriers.u1": ("u1", _text),
    "barriers.u2": ("u2", _text),
    "barriers.epsilon1": ("epsilon1", _real),
    "barriers.slack": ("slack", _real),
    "grid.n_theta": ("n_theta", _int),
    "grid.n_phi": ("n_phi", _int),
    "tubular.eps0": ("eps0", _opt_real),
    "tubular.n_levels": ("n_levels", _int),
    "homotopy.lambda": ("lam", _opt_real),
    "homotopy.tau0": ("tau0", _opt_real),
    "homotopy.dt0": ("dt0", _real),
    "homotopy.dt_min": ("dt_min", _real),
    "homotopy.tol": ("tol", _real),
    "homotopy.max_steps": ("max_steps", _int),
    "monitors.grad_cap": ("grad_cap", _opt_real),
    "monitors.kappa_cap": ("kappa_cap", _opt_real),
    "diagnostics.uniqueness_trials": ("uniqueness_trials", _int),
    "diagnostics.jacobian_check": ("jacobian_check", _bool),
    "diagnostics.coercivity": ("coercivity", _bool),
    "diagnostics.c2_monitor": ("c2_monitor", _bool),
    "diagnostics.lambda_w": ("lambda_w", _real),
    "diagnostics.mu_w": ("mu_w", _real),
}


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    seed: int = 0
    ambient_kind: str = "euclidean_polar"
    dim_n: int = 1
    warp: str | None = None
    psi: str | None = None
    chi: str | None = None
    x0_min: float | None = None
    x0_max: float | None = None
    curvature: str = "mean"
    curvature_k: int | None = None
    f: str = "1"
    c1: float | None = None
    c2: float | None = None
    clamp: bool = False
    u1: str = "1"
    u2: str = "2"
    epsilon1: float = 0.01
    slack: float = 1e-8
    n_theta: int = 256
    n_phi: int = 0
    eps0: float | None = None
    n_levels: int = 5
    lam: float | None = None
    tau0: float | None = None
    dt0: float = 0.1
    dt_min: float = 1e-4
    tol: float = 1e-10
    max_steps: int = 500
    grad_cap: float | None = None
    kappa_cap: float | None = None
    uniqueness_trials: int = 20
    jacobian_check: bool = True
    coercivity: bool = True
    c2_monitor: bool = True
    lambda_w: float = 1.0
    mu_w: float = 1.0

    def with_grid(self, n: int) -> "Scenario":
        """Override the resolution: ``n`` theta points (and n/2 colatitudes for n = 2)."""
        if self.dim_n == 1:
            return replace(self, n_theta=int(n))
        return replace(self, n_theta=int(n), n_phi=int(n) // 2)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=int(seed))


assert [s[0] for s in SCHEMA.values()] == [f.name for f in fields(Scenario)]


def parse(text: str, source: str = "<scenario>") -> Scenario:
    values = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ScenarioParseError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ScenarioParseError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ScenarioParseError(f"{source}:{lineno}: {key!r} repeated (first on line {seen[key]})")
        seen[key] = lineno
        attr, conv = SCHEMA[key]
        try:
            values[attr] = conv(value)
        except ValueError as exc:
            raise ScenarioParseError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return Scenario(**values)


def serialize(s: Scenario) -> str:
    lines = []
    for key, (attr, conv) in SCHEMA.items():
        value = getattr(s, attr)
        lines.append(f"{key} = {'none' if value is None and conv is _opt_text else _fmt(value)}\n")
    return "".join(lines)


def load(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario {path}: {exc}") from None
    return parse(text, str(path))
