"""Divergence-free velocity models on the unit torus.

Models are analytic specifications: ``evaluate(t, x, y)`` is exact at any
point, so flow-map tests carry no interpolation error.  Each model declares a
:class:`RegularityBudget` and the times where it jumps (``breakpoints``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import make_field, node_coordinates, spectral_gradient


@dataclass(frozen=True)
class RegularityBudget:
    """Sup-in-time norms of a velocity field.

    Attributes
    ----------
    lip : float
        Spatial Lipschitz constant (``inf`` for discontinuous fields).
    kinetic : float
        ``L^2`` norm.
    enstrophy : float
        ``L^2`` norm of the physical gradient.
    bv : float
        Total variation ``int |Du|``.
    sup_norm : float
        ``L^inf`` norm.
    sobolev_p, w1p_norm : float
        Exponent ``p`` and the ``L^p`` norm of ``|Du|``.
    """

    lip: float
    kinetic: float
    enstrophy: float
    bv: float
    sup_norm: float
    sobolev_p: float = 2.0
    w1p_norm: float = math.nan

    def __post_init__(self) -> None:
        for name in ("lip", "kinetic", "enstrophy", "bv", "sup_norm"):
            if getattr(self, name) < 0:
                raise ValueError(f"budget entry {name} must be nonnegative")

    def as_dict(self) -> dict:
        return {
            "lip": self.lip,
            "kinetic": self.kinetic,
            "enstrophy": self.enstrophy,
            "bv": self.bv,
            "sup_norm": self.sup_norm,
            "sobolev_p": self.sobolev_p,
            "w1p_norm": self.w1p_norm,
        }


def abs_cos_lp(p: float) -> float:
    """``(int_0^1 |cos 2 pi y|^p dy)^(1/p)``."""
    if math.isinf(p):
        return 1.0
    mean = math.gamma((p + 1) / 2) / (math.sqrt(math.pi) * math.gamma(p / 2 + 1))
    return mean ** (1.0 / p)


def _shear_budget(a: float, p: float) -> RegularityBudget:
    return RegularityBudget(
        lip=2 * math.pi * a,
        kinetic=a / math.sqrt(2),
        enstrophy=math.sqrt(2) * math.pi * a,
        bv=4 * a,
        sup_norm=a,
        sobolev_p=p,
        w1p_norm=2 * math.pi * a * abs_cos_lp(p),
    )


class VelocityModel:
    """Base class; subclasses implement :meth:`evaluate`."""

    kind: str = "abstract"
    #: one RK4 step reproduces trajectories exactly (constant or shear flows)
    exact_per_step: bool = False

    def __init__(self, budget: RegularityBudget):
        self.budget = budget

    def evaluate(self, t: float, x, y) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def breakpoints(self, t0: float, t1: float) -> list[float]:
        """Times strictly inside ``(min, max)`` where the field jumps."""
        return []

    def describe(self) -> dict:
        return {"kind": self.kind}

    def __repr__(self) -> str:
        params = ", ".join(f"{k}={v}" for k, v in self.describe().items() if k != "kind")
        return f"{type(self).__name__}({params})"


class Translation(VelocityModel):
    kind = "translation"
    exact_per_step = True

    def __init__(self, v, p: float = 2.0):
        self.v = (float(v[0]), float(v[1]))
        speed = math.hypot(*self.v)
        super().__init__(RegularityBudget(0.0, speed, 0.0, 0.0, speed, p, 0.0))

    def evaluate(self, t, x, y):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape, self.v[0]), np.full(x.shape, self.v[1])

    def describe(self):
        return {"kind": self.kind, "v": list(self.v)}


class SteadyShear(VelocityModel):
    """``u(x, y) = (a sin(2 pi y), 0)``."""

    kind = "steady_shear"
    exact_per_step = True

    def __init__(self, amplitude: float, p: float = 2.0):
        if amplitude <= 0:
            raise ValueError("amplitude must be positive")
        self.a = float(amplitude)
        super().__init__(_shear_budget(self.a, p))

    def evaluate(self, t, x, y):
        y = np.asarray(y, dtype=float)
        return self.a * np.sin(2 * np.pi * y), np.zeros(y.shape)

    def exact_flow(self, t: float, x, y):
        return np.asarray(x) + t * self.a * np.sin(2 * np.pi * np.asarray(y)), np.asarray(y, dtype=float)

    def describe(self):
        return {"kind": self.kind, "amplitude": self.a}


class AlternatingShear(VelocityModel):
    """Horizontal shear on ``[2n tau, (2n+1) tau)``, vertical shear on the rest."""

    kind = "alternating_shear"
    exact_per_step = True

    def __init__(self, amplitude: float, half_period: float, p: float = 2.0):
        if amplitude <= 0 or half_period <= 0:
            raise ValueError("amplitude and half_period must be positive")
        self.a = float(amplitude)
        self.tau = float(half_period)
        super().__init__(_shear_budget(self.a, p))

    def phase(self, t: float) -> int:
        """0 for the horizontal stage, 1 for the vertical one."""
        return int(math.floor(t / self.tau + 1e-12)) % 2

    def evaluate(self, t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.phase(t) == 0:
            return self.a * np.sin(2 * np.pi * y), np.zeros(y.shape)
        return np.zeros(x.shape), self.a * np.sin(2 * np.pi * x)

    def breakpoints(self, t0, t1):
        lo, hi = min(t0, t1), max(t0, t1)
        n0 = math.floor(lo / self.tau) + 1
        out = []
        n = n0
        while n * self.tau < hi - 1e-12:
            if n * self.tau > lo + 1e-12:
                out.append(n * self.tau)
            n += 1
        return out

    def describe(self):
        return {"kind": self.kind, "amplitude": self.a, "half_period": self.tau}


class GridSampled(VelocityModel):
    """Steady velocity given by node samples, evaluated by bicubic interpolation."""

    kind = "grid_sampled"

    def __init__(self, u1: np.ndarray, u2: np.ndarray, p: float = 2.0, source: str | None = None):
        self.u1 = np.ascontiguousarray(u1, dtype=float)
        self.u2 = np.ascontiguousarray(u2, dtype=float)
        self.source = source
        super().__init__(self._estimate_budget(p))

    def _estimate_budget(self, p: float) -> RegularityBudget:
        g1x, g1y = spectral_gradient(make_field(self.u1))
        g2x, g2y = spectral_gradient(make_field(self.u2))
        frob2 = g1x**2 + g1y**2 + g2x**2 + g2y**2
        speed = np.sqrt(self.u1**2 + self.u2**2)
        # operator norm of the 2x2 Jacobian, padded for inter-node overshoot
        tr = g1x**2 + g1y**2 + g2x**2 + g2y**2
        det = g1x * g2y - g1y * g2x
        opn = np.sqrt(0.5 * (tr + np.sqrt(np.maximum(tr**2 - 4 * det**2, 0.0))))
        frob = np.sqrt(frob2)
        w1p = float(np.max(frob)) if math.isinf(p) else float(np.mean(frob**p) ** (1 / p))
        return RegularityBudget(
            lip=1.02 * float(np.max(opn)),
            kinetic=float(np.sqrt(np.mean(speed**2))),
            enstrophy=float(np.sqrt(np.mean(frob2))),
            bv=float(np.mean(frob)),
            sup_norm=1.02 * float(np.max(speed)),
            sobolev_p=p,
            w1p_norm=w1p,
        )

    def evaluate(self, t, x, y):
        return (
            _kernels.bicubic_periodic(self.u1, x, y),
            _kernels.bicubic_periodic(self.u2, x, y),
        )

    def describe(self):
        return {"kind": self.kind, "file": self.source, "N": int(self.u1.shape[0])}


def translation(v) -> Translation:
    return Translation(v)


def steady_shear(amplitude: float, p: float = 2.0) -> SteadyShear:
    return SteadyShear(amplitude, p)


def alternating_shear(amplitude: float, half_period: float, p: float = 2.0) -> AlternatingShear:
    return AlternatingShear(amplitude, half_period, p)


def grid_sampled(path, p: float = 2.0) -> GridSampled:
    """Load a two-component velocity stored in the binary field format."""
    from .grid import read_binary

    comps = read_binary(path)
    if len(comps) != 2:
        raise ValueError(f"{path}: expected two velocity components, found {len(comps)}")
    return GridSampled(comps[0].samples, comps[1].samples, p, source=str(path))


def sample_velocity(model: VelocityModel, t: float, N: int) -> tuple[np.ndarray, np.ndarray]:
    X, Y = node_coordinates(N)
    u1, u2 = model.evaluate(t, X, Y)
    return np.asarray(u1, dtype=float), np.asarray(u2, dtype=float)


def divergence_field(model: VelocityModel, t: float, N: int, method: str = "spectral") -> np.ndarray:
    """Divergence of the node-sampled velocity.

    ``method="fd"`` uses periodic central differences, which stay exact away
    from discontinuity lines of piecewise-constant fields.
    """
    u1, u2 = sample_velocity(model, t, N)
    if method == "spectral":
        d1x, _ = spectral_gradient(make_field(u1))
        _, d2y = spectral_gradient(make_field(u2))
        return d1x + d2y
    if method == "fd":
        h = 1.0 / N
        d1x = (np.roll(u1, -1, axis=0) - np.roll(u1, 1, axis=0)) / (2 * h)
        d2y = (np.roll(u2, -1, axis=1) - np.roll(u2, 1, axis=1)) / (2 * h)
        return d1x + d2y
    raise ValueError(f"unknown method {method!r}")


def divergence_check(model: VelocityModel, t: float, N: int = 256) -> float:
    """``L^2`` norm of the spectral divergence of the sampled velocity."""
    div = divergence_field(model, t, N, "spectral")
    return float(np.sqrt(np.mean(div * div)))


@dataclass(frozen=True)
class BudgetAudit:
    declared: dict
    sampled: dict
    relative_error: dict
    passed: bool


def audit_budget(model: VelocityModel, times, N: int = 256, rtol: float = 0.05) -> BudgetAudit:
    """Compare declared budget entries with sampled values on an ``N x N`` probe.

    Lipschitz constants are probed by one-cell difference quotients along both
    axes; infinite declared entries are skipped.
    """
    h = 1.0 / N
    sup = kin = ens = lip = 0.0
    for t in times:
        u1, u2 = sample_velocity(model, t, N)
        speed2 = u1**2 + u2**2
        sup = max(sup, float(np.sqrt(np.max(speed2))))
        kin = max(kin, float(np.sqrt(np.mean(speed2))))
        g = [
            (np.roll(c, -1, axis=ax) - np.roll(c, 1, axis=ax)) / (2 * h) for c in (u1, u2) for ax in (0, 1)
        ]
        ens = max(ens, float(np.sqrt(np.mean(sum(gi**2 for gi in g)))))
        for ax in (0, 1):
            dq = np.sqrt((np.roll(u1, -1, axis=ax) - u1) ** 2 + (np.roll(u2, -1, axis=ax) - u2) ** 2) / h
            lip = max(lip, float(np.max(dq)))
    b = model.budget
    declared = {"sup_norm": b.sup_norm, "kinetic": b.kinetic, "enstrophy": b.enstrophy, "lip": b.lip}
    sampled = {"sup_norm": sup, "kinetic": kin, "enstrophy": ens, "lip": lip}
    rel = {}
    for k, dv in declared.items():
        if math.isinf(dv):
            continue
        scale = max(dv, 1e-300)
        rel[k] = abs(dv - sampled[k]) / scale if dv > 0 else sampled[k]
    passed = all(v <= rtol for v in rel.values()) and b.kinetic <= b.sup_norm + 1e-12
    return BudgetAudit(declared, sampled, rel, passed)
