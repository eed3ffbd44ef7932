"""Prescribed right-hand sides ``f(x0, x, nu)`` and the smooth clamp."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ambient as amb
from .errors import ConfigurationError
from .expressions import Expression


def rhs_variables(dim_n: int) -> tuple[str, ...]:
    return ("x0", *amb.angle_names(dim_n), *(f"nu{i}" for i in range(dim_n + 1)))


def clamp_profile(t, c1: float, c2: float):
    """Smooth monotone clamp: c1/2 below c1/2, identity on [c1, c2/2], c2 above c2.

    The transition bands are C^2 quintic blends.  Selection uses the real part
    only, so complex-step derivatives pass through.
    """
    t = np.asarray(t)
    tr = np.real(t)
    a, L = 0.5 * c1, 0.5 * c1
    s = (t - a) / L
    low = a + L * s**3 * (6.0 - 8.0 * s + 3.0 * s**2)
    b, M = 0.5 * c2, 0.5 * c2
    r = (t - b) / M
    high = b + M * (r + r**3 * (4.0 - 7.0 * r + 3.0 * r**2))
    out = np.where(tr <= a, a + 0 * t, t)
    out = np.where((tr > a) & (tr < c1), low, out)
    out = np.where((tr > b) & (tr < c2), high, out)
    out = np.where(tr >= c2, c2 + 0 * t, out)
    return out


@dataclass(frozen=True)
class RightHandSide:
    """``f(x0, x, nu)`` as an expression with declared bounds ``0 < c1 <= f <= c2``.

    ``nu`` is passed as the contravariant components ``(nu^0, ..., nu^n)``.
    """

    text: str
    dim_n: int
    c1: float | None = None
    c2: float | None = None
    clamp: bool = False

    def __post_init__(self):
        object.__setattr__(self, "_expr", Expression(self.text, rhs_variables(self.dim_n)))
        if self.clamp:
            _check_bands(self.c1, self.c2)

    def __call__(self, x0, x, nu):
        names = amb.angle_names(self.dim_n)
        kw = {"x0": x0}
        kw.update({a: x[..., i] for i, a in enumerate(names)})
        kw.update({f"nu{i}": nu[..., i] for i in range(self.dim_n + 1)})
        val = self._expr(**kw)
        if self.clamp:
            val = clamp_profile(val, self.c1, self.c2)
        return val

    def depends_on_normal(self) -> bool:
        return any(self._expr.depends_on(f"nu{i}") for i in range(self.dim_n + 1))


def _check_bands(c1, c2):
    if c1 is None or c2 is None:
        raise ConfigurationError("clamping needs both c1 and c2")
    if not 0 < c1 < c2:
        raise ConfigurationError(f"need 0 < c1 < c2, got c1={c1}, c2={c2}")
    if 2 * c1 > c2:
        raise ConfigurationError("clamp bands overlap: need c1 <= c2/2")


def clamp_rhs(f: RightHandSide, c1: float, c2: float) -> RightHandSide:
    """``theta o f`` with the three-band clamp; ``= f`` wherever c1 <= f <= c2/2."""
    _check_bands(c1, c2)
    return RightHandSide(f.text, f.dim_n, float(c1), float(c2), clamp=True)


def sample_bounds(f: RightHandSide, m: amb.AmbientManifold, x0_lo, x0_hi, x, n_levels=9,
                  n_normals=8, seed=0):
    """Sampled ``(min f, max f)`` over x0 between two nodal graphs and unit normals."""
    rng = np.random.default_rng(seed)
    lows, highs = [], []
    for s in np.linspace(0.0, 1.0, n_levels):
        x0 = (1 - s) * np.asarray(x0_lo) + s * np.asarray(x0_hi)
        g = amb.ambient_metric(m, x0, x)
        for _ in range(n_normals):
            w = rng.normal(size=x0.shape + (f.dim_n + 1,))
            norm = np.sqrt(np.einsum("...a,...ab,...b->...", w, g, w))
            val = np.real(f(x0, x, w / norm[..., None]))
            lows.append(val.min())
            highs.append(val.max())
    return float(min(lows)), float(max(highs))
