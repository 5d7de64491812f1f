"""Closed-form lower bounds on the mixing scales and compliance checks.

Curves are evaluated from declared budgets only; measured data enters on the
observed side of a comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BOUND_KINDS = (
    "lipschitz_exponential",
    "kinetic_linear",
    "enstrophy_linear_suboptimal",
    "interpolated_exponential",
    "geometric_exponential",
)
DEFAULT_TOLERANCE = 0.05
#: series column each curve kind bounds from below
OBSERVABLE = {k: "mix_f" for k in BOUND_KINDS} | {"geometric_exponential": "mix_g"}


@dataclass(frozen=True)
class BoundCurve:
    """Lower-bound values at ``times``.

    ``observable`` names the series column the curve bounds (``mix_f`` or
    ``mix_g``).  ``zero_crossing`` is the first time the curve reaches 0, if
    any.  ``suboptimal`` marks informational curves.
    """

    kind: str
    params: dict
    times: np.ndarray
    values: np.ndarray
    observable: str = "mix_f"
    zero_crossing: float | None = None
    suboptimal: bool = False

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "observable": self.observable,
            "times": self.times.tolist(),
            "values": self.values.tolist(),
            "zero_crossing": self.zero_crossing,
            "suboptimal": self.suboptimal,
        }


def _times(times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(t < 0):
        raise ValueError("times must be nonnegative")
    return t


def lipschitz_exponential(mix0: float, L: float, times) -> BoundCurve:
    """``mix0 * exp(-L t)``."""
    if L < 0:
        raise ValueError("L must be nonnegative")
    t = _times(times)
    return BoundCurve("lipschitz_exponential", {"mix0": mix0, "L": L}, t, mix0 * np.exp(-L * t))


def kinetic_linear(mix0: float, K: float, rho_sup: float, times) -> BoundCurve:
    """``max(0, mix0 - K rho_sup t)`` with its zero-crossing time."""
    if K < 0 or rho_sup < 0:
        raise ValueError("K and rho_sup must be nonnegative")
    t = _times(times)
    rate = K * rho_sup
    tstar = mix0 / rate if rate > 0 else None
    vals = np.maximum(0.0, mix0 - rate * t)
    return BoundCurve(
        "kinetic_linear", {"mix0": mix0, "K": K, "rho_sup": rho_sup}, t, vals, zero_crossing=tstar
    )


def interpolated_exponential(rho_l2: float, rho_h1: float, L: float, times) -> BoundCurve:
    """``(||rho||_2^2 / ||rho||_H1) exp(-L t)``."""
    if rho_h1 <= 0:
        raise ValueError("the H^1 norm of the datum must be positive")
    if L < 0:
        raise ValueError("L must be nonnegative")
    t = _times(times)
    c = rho_l2 * rho_l2 / rho_h1
    return BoundCurve(
        "interpolated_exponential",
        {"rho_l2": rho_l2, "rho_h1": rho_h1, "L": L},
        t,
        c * np.exp(-L * t),
    )


def enstrophy_report(E: float, rho_l2: float, times, mix0: float | None = None) -> BoundCurve:
    """Informational linear curve ``mix0 - E ||rho||_2 t`` (constant 1, clamped at 0).

    The underlying differential inequality holds only up to an unstated
    constant and is not sharp, so the curve is flagged ``suboptimal``.
    Without ``mix0`` the curve starts at 0 and only records the rate.
    """
    if E < 0:
        raise ValueError("E must be nonnegative")
    t = _times(times)
    m0 = 0.0 if mix0 is None else mix0
    rate = E * rho_l2
    vals = np.maximum(0.0, m0 - rate * t)
    tstar = m0 / rate if rate > 0 else None
    return BoundCurve(
        "enstrophy_linear_suboptimal",
        {"E": E, "rho_l2": rho_l2, "mix0": m0},
        t,
        vals,
        zero_crossing=tstar,
        suboptimal=True,
    )


def geometric_exponential(beta: float, big_m: float, times, prefactor: float = 1.0 / 6.0) -> BoundCurve:
    """``prefactor * exp(-beta M t)`` bounding the geometric scale."""
    t = _times(times)
    return BoundCurve(
        "geometric_exponential",
        {"beta": beta, "M": big_m, "prefactor": prefactor},
        t,
        prefactor * np.exp(-beta * big_m * t),
        observable="mix_g",
    )


@dataclass
class MixingSeries:
    """Aligned diagnostic columns of one run."""

    t: np.ndarray
    mix_f: np.ndarray
    mix_g: np.ndarray
    mix_g_bracket: np.ndarray
    mix_g_saturated: np.ndarray
    l1: np.ndarray
    l2: np.ndarray
    linf: np.ndarray
    h1: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.t)
        for name in ("mix_f", "mix_g", "mix_g_bracket", "mix_g_saturated", "l1", "l2", "linf", "h1"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has {len(getattr(self, name))} rows, expected {n}")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("times must be strictly increasing")

    def column(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    @classmethod
    def synthetic(cls, t, mix_f=None, mix_g=None) -> "MixingSeries":
        """Series with only the named columns filled (others ``nan``)."""
        t = np.asarray(t, dtype=float)
        nan = np.full(t.size, np.nan)
        return cls(
            t,
            nan.copy() if mix_f is None else np.asarray(mix_f, dtype=float),
            nan.copy() if mix_g is None else np.asarray(mix_g, dtype=float),
            nan.copy(),
            np.zeros(t.size, dtype=bool),
            nan.copy(),
            nan.copy(),
            nan.copy(),
            nan.copy(),
        )


@dataclass(frozen=True)
class ComplianceReport:
    kind: str
    observable: str
    margins: np.ndarray
    threshold: float
    passed: bool
    informational: bool = False

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "observable": self.observable,
            "margin": self.margins.tolist(),
            "threshold": self.threshold,
            "pass": bool(self.passed),
            "informational": self.informational,
        }


def compliance(series: MixingSeries, curves, tolerance: float = DEFAULT_TOLERANCE) -> list[ComplianceReport]:
    """Margins ``observed - bound`` at every snapshot.

    A curve passes when every margin is at least ``-tolerance * observed(0)``.
    Time grids must agree to ``1e-12``.
    """
    out = []
    for c in curves:
        if c.times.shape != series.t.shape or not np.allclose(c.times, series.t, rtol=0, atol=1e-12):
            raise ValueError(f"time grid of curve {c.kind} does not match the series")
        obs = series.column(c.observable)
        margins = obs - c.values
        threshold = -tolerance * abs(float(obs[0]))
        passed = bool(np.all(np.isfinite(margins)) and np.all(margins >= threshold))
        out.append(ComplianceReport(c.kind, c.observable, margins, threshold, passed, c.suboptimal))
    return out


def budget_curves(
    kinds,
    times,
    mix0: float,
    budget,
    rho_sup: float,
    rho_l2: float,
    rho_h1: float,
) -> list[BoundCurve]:
    """Build the requested curves from a velocity budget and datum norms.

    ``K`` and ``E`` are the physical norms; the bounds are stated for the
    integer-wavenumber scale, so the rates carry a factor ``2 pi``.
    """
    curves = []
    for kind in kinds:
        if kind == "lipschitz_exponential":
            if math.isfinite(budget.lip):
                curves.append(lipschitz_exponential(mix0, budget.lip, times))
        elif kind == "kinetic_linear":
            curves.append(kinetic_linear(mix0, 2 * math.pi * budget.kinetic, rho_sup, times))
        elif kind == "enstrophy_linear_suboptimal":
            if math.isfinite(budget.enstrophy):
                curves.append(enstrophy_report(2 * math.pi * budget.enstrophy, rho_l2, times, mix0))
        elif kind == "interpolated_exponential":
            if math.isfinite(budget.lip) and rho_h1 > 0:
                curves.append(interpolated_exponential(rho_l2, rho_h1, budget.lip, times))
        elif kind == "geometric_exponential":
            continue  # needs the measured constant chain, built by the caller
        else:
            raise ValueError(f"unknown bound kind {kind!r}")
    return curves
