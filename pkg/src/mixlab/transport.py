"""Flow maps and semi-Lagrangian transport of scalars."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .grid import ScalarField, lp_norm, make_field, node_coordinates, spectral, wavenumber_squared
from .velocity import VelocityModel

DEFAULT_CFL = 0.5
INTEGRATOR_TOL = 1e-6
_SNAP = 1e-9


class TransportError(RuntimeError):
    pass


class CFLError(TransportError):
    pass


class BreakpointError(TransportError):
    pass


@dataclass(frozen=True)
class FlowMap:
    """Node trajectories carried on the universal cover.

    ``x[i, j], y[i, j]`` is the position at time ``t`` of the trajectory that
    sat at node ``(i/N, j/N)`` at ``seed_time``.  ``direction`` is
    ``"backward"`` when ``t < seed_time``.
    """

    N: int
    t: float
    x: np.ndarray
    y: np.ndarray
    seed_time: float = 0.0
    direction: str = "forward"

    def torus_positions(self) -> tuple[np.ndarray, np.ndarray]:
        return np.mod(self.x, 1.0), np.mod(self.y, 1.0)

    def displacement(self) -> tuple[np.ndarray, np.ndarray]:
        X, Y = node_coordinates(self.N)
        return self.x - X, self.y - Y

    def wrap_counts(self) -> tuple[np.ndarray, np.ndarray]:
        return np.floor(self.x).astype(np.int64), np.floor(self.y).astype(np.int64)


def torus_delta(a, b):
    """Minimal-image difference ``b - a`` on the unit circle."""
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return d - np.round(d)


def torus_distance(x0, y0, x1, y1) -> np.ndarray:
    return np.hypot(torus_delta(x0, x1), torus_delta(y0, y1))


def _segments(model: VelocityModel, t0: float, t1: float) -> list[tuple[float, float]]:
    cuts = sorted(model.breakpoints(t0, t1), reverse=bool(t1 < t0))
    pts = [t0, *cuts, t1]
    return [(pts[k], pts[k + 1]) for k in range(len(pts) - 1) if pts[k] != pts[k + 1]]


def check_cfl(model: VelocityModel, dt: float, N: int, cfl: float = DEFAULT_CFL) -> None:
    if dt <= 0:
        raise CFLError(f"time step must be positive, got {dt}")
    if model.exact_per_step:
        return
    if dt * model.budget.sup_norm > cfl / N:
        raise CFLError(
            f"dt={dt} violates CFL: dt*sup|u|={dt * model.budget.sup_norm:.3e} > {cfl}/N={cfl / N:.3e}"
        )


def rk4_integrate(model: VelocityModel, x, y, t0: float, t1: float, nsteps: int):
    """Classical RK4 from ``t0`` to ``t1`` in ``nsteps`` equal steps.

    The interval must not contain a declared breakpoint.  Stage times are
    clamped into the open interval so a jump at an endpoint is never sampled.
    """
    if model.breakpoints(t0, t1):
        raise BreakpointError(f"interval [{t0}, {t1}] straddles breakpoints {model.breakpoints(t0, t1)}")
    lo, hi = min(t0, t1), max(t0, t1)
    eps = 1e-12 * max(1.0, abs(hi))

    def vel(t, px, py):
        return model.evaluate(min(max(t, lo + eps), hi - eps), px, py)

    h = (t1 - t0) / nsteps
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    t = t0
    for n in range(nsteps):
        t = t0 + n * h
        k1x, k1y = vel(t, x, y)
        k2x, k2y = vel(t + 0.5 * h, x + 0.5 * h * k1x, y + 0.5 * h * k1y)
        k3x, k3y = vel(t + 0.5 * h, x + 0.5 * h * k2x, y + 0.5 * h * k2y)
        k4x, k4y = vel(t + h, x + h * k3x, y + h * k3y)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        y = y + (h / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
    return x, y


def integrate_points(model: VelocityModel, x, y, t0: float, t1: float, dt: float):
    """Carry points from ``t0`` to ``t1`` (either direction), splitting at breakpoints."""
    for a, b in _segments(model, t0, t1):
        n = max(1, math.ceil(abs(b - a) / dt - 1e-9))
        x, y = rk4_integrate(model, x, y, a, b, n)
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def flow_map(
    model: VelocityModel,
    t0: float,
    t1: float,
    dt: float,
    N: int,
    cfl: float = DEFAULT_CFL,
) -> FlowMap:
    """Positions at ``t1`` of trajectories seeded at the nodes at ``t0``.

    ``t1 < t0`` gives the backward (inverse) map of the two-parameter flow.
    """
    check_cfl(model, dt, N, cfl)
    X, Y = node_coordinates(N)
    x, y = integrate_points(model, X, Y, t0, t1, dt)
    return FlowMap(N, t1, x, y, seed_time=t0, direction="backward" if t1 < t0 else "forward")


def compose_identity_error(model: VelocityModel, t: float, dt: float, N: int) -> float:
    """Max node displacement after flowing ``0 -> t`` and back to ``0``."""
    fwd = flow_map(model, 0.0, t, dt, N)
    bx, by = integrate_points(model, fwd.x, fwd.y, t, 0.0, dt)
    X, Y = node_coordinates(N)
    return float(np.max(np.hypot(bx - X, by - Y)))


def jacobian_determinant(flow: FlowMap) -> np.ndarray:
    """Central-difference Jacobian determinant of the map on the cover."""
    N = flow.N
    h = 1.0 / N
    dx, dy = flow.displacement()

    def d(a, ax):
        return (np.roll(a, -1, axis=ax) - np.roll(a, 1, axis=ax)) / (2 * h)

    return (1.0 + d(dx, 0)) * (1.0 + d(dy, 1)) - d(dx, 1) * d(dy, 0)


def _snap(p: np.ndarray, N: int) -> np.ndarray:
    g = p * N
    r = np.round(g)
    return np.where(np.abs(g - r) < _SNAP, r / N, p)


def advect(
    fld: ScalarField,
    model: VelocityModel,
    t: float,
    dt: float,
    cfl: float = DEFAULT_CFL,
    t0: float = 0.0,
) -> ScalarField:
    """Scalar at time ``t0 + t`` by the characteristics formula.

    Each node is traced back to ``t0`` and the initial datum is read there by
    periodic bicubic interpolation.  Feet landing within ``1e-9`` cells of a
    node are snapped onto it, which makes lattice-commensurate motions exact.
    """
    if t == 0:
        return fld
    check_cfl(model, dt, fld.N, cfl)
    back = flow_map(model, t0 + t, t0, dt, fld.N, cfl)
    return interpolate_datum(fld, back)


def interpolate_datum(fld: ScalarField, back: FlowMap) -> ScalarField:
    N = fld.N
    px = _snap(np.mod(back.x, 1.0), N)
    py = _snap(np.mod(back.y, 1.0), N)
    vals = _kernels.bicubic_periodic(np.ascontiguousarray(fld.samples), px, py)
    return make_field(vals)


@dataclass(frozen=True)
class GronwallReport:
    t: float
    lip: float
    lower: float
    upper: float
    min_ratio: float
    max_ratio: float
    margin: float
    passed: bool
    pairs: int


def pair_ratios(flow: FlowMap, i0, j0, i1, j1) -> np.ndarray:
    N = flow.N
    px, py = flow.torus_positions()
    num = torus_distance(px[i0, j0], py[i0, j0], px[i1, j1], py[i1, j1])
    den = torus_distance(i0 / N, j0 / N, i1 / N, j1 / N)
    return num / den


def random_node_pairs(N: int, count: int, rng: np.random.Generator):
    i0, j0, i1, j1 = (rng.integers(0, N, size=count) for _ in range(4))
    same = (i0 == i1) & (j0 == j1)
    i1 = np.where(same, (i1 + 1) % N, i1)
    return i0, j0, i1, j1


def gronwall_check(
    flows,
    lip: float,
    sample_pairs: int = 100_000,
    rng: np.random.Generator | None = None,
    tol: float = INTEGRATOR_TOL,
) -> GronwallReport:
    """Two-sided exponential check of distance ratios under the flow.

    ``flows`` is a :class:`FlowMap` or a sequence of maps at the same elapsed
    time (typically the forward map and its inverse); every map is checked
    against ``exp(-L t) - tol <= ratio <= exp(L t) + tol``.
    """
    if math.isinf(lip):
        raise ValueError("Lipschitz budget must be finite")
    if isinstance(flows, FlowMap):
        flows = [flows]
    rng = rng or np.random.default_rng(0)
    elapsed = abs(flows[0].t - flows[0].seed_time)
    lower = math.exp(-lip * elapsed)
    upper = math.exp(lip * elapsed)
    lo, hi = math.inf, -math.inf
    for fl in flows:
        r = pair_ratios(fl, *random_node_pairs(fl.N, sample_pairs, rng))
        lo = min(lo, float(r.min()))
        hi = max(hi, float(r.max()))
    margin = min(lo - (lower - tol), (upper + tol) - hi)
    return GronwallReport(elapsed, lip, lower, upper, lo, hi, margin, margin >= 0, sample_pairs * len(flows))


@dataclass(frozen=True)
class ConservationReport:
    times: np.ndarray
    l1: np.ndarray
    l2: np.ndarray
    linf: np.ndarray
    mean: np.ndarray
    shell_energy: np.ndarray
    drift: dict = field(default_factory=dict)


def shell_energy(fld: ScalarField) -> np.ndarray:
    """Spectral energy ``sum |f_hat|^2`` binned by ``round(|k|)``."""
    N = fld.N
    power = np.abs(spectral(fld).coefficients) ** 2
    shells = np.rint(np.sqrt(wavenumber_squared(N))).astype(np.int64)
    return np.bincount(shells.ravel(), weights=power.ravel(), minlength=int(shells.max()) + 1)


def conservation_report(fields, times=None) -> ConservationReport:
    """Norm and spectral-shell time series with drift relative to the first entry."""
    fields = list(fields)
    if times is None:
        times = np.arange(len(fields), dtype=float)
    l1 = np.array([lp_norm(f, 1) for f in fields])
    l2 = np.array([lp_norm(f, 2) for f in fields])
    linf = np.array([lp_norm(f, np.inf) for f in fields])
    mean = np.array([f.mean for f in fields])
    shells = [shell_energy(f) for f in fields]
    width = max(s.size for s in shells)
    shell_arr = np.zeros((len(fields), width))
    for k, s in enumerate(shells):
        shell_arr[k, : s.size] = s

    def rel(a):
        return float(np.max(np.abs(a - a[0])) / a[0]) if a[0] != 0 else float(np.max(np.abs(a)))

    drift = {
        "l1": rel(l1),
        "l2": rel(l2),
        "linf": rel(linf),
        "mean": float(np.max(np.abs(mean - mean[0]))),
    }
    return ConservationReport(np.asarray(times, dtype=float), l1, l2, linf, mean, shell_arr, drift)


def write_flowmap(path, flow: FlowMap) -> None:
    """Binary export: ``int64 N``, ``float64 t``, then x and y positions (little-endian)."""
    head = np.array([flow.N], dtype="<i8").tobytes() + np.array([flow.t], dtype="<f8").tobytes()
    body = np.ascontiguousarray(flow.x, dtype="<f8").tobytes() + np.ascontiguousarray(flow.y, dtype="<f8").tobytes()
    Path(path).write_bytes(head + body)


def read_flowmap(path) -> FlowMap:
    data = Path(path).read_bytes()
    N = int(np.frombuffer(data, dtype="<i8", count=1)[0])
    t = float(np.frombuffer(data, dtype="<f8", count=1, offset=8)[0])
    xy = np.frombuffer(data, dtype="<f8", count=2 * N * N, offset=16)
    return FlowMap(N, t, xy[: N * N].reshape(N, N).copy(), xy[N * N :].reshape(N, N).copy())
