"""Maximal functions, the logarithmic flow functional and Lusin-Lipschitz bounds.

Suprema over radii are maxima over a finite radii set and suprema over time
are maxima over snapshot times, so every reported quantity is an inner
approximation of its continuum counterpart.  All distances are torus
distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .grid import ScalarField, make_field, node_coordinates, spectral_gradient
from .mixing import (
    MixParams,
    _ball_mean_from_hat,
    _check_radius,
    binary_kappa,
    default_radii,
    disk_kernel,
    mix_g,
    offset_grid,
)
from .transport import FlowMap, advect, flow_map, torus_distance
from .velocity import RegularityBudget, VelocityModel

DEFAULT_P = 2.0


# -- maximal function ------------------------------------------------------------


@dataclass(frozen=True)
class MaximalField:
    source: str
    radii: np.ndarray
    values: np.ndarray


def maximal_function(fld: ScalarField, radii=None, source: str = "") -> MaximalField:
    """``Mf(x) = max_r`` of the mean of ``|f|`` over ``B(x, r)``.

    ``radii`` defaults to all grid radii ``j/N`` up to ``1/2``; the single-node
    radius ``0`` is always included, so ``Mf >= |f|``.
    """
    N = fld.N
    radii = default_radii(N) if radii is None else np.asarray(radii, dtype=float)
    a = np.abs(fld.samples)
    out = a.copy()
    fhat = None
    lo, hi = float(a.min()), float(a.max())
    for r in radii:
        if r == 0:
            continue
        if lo == hi:
            break
        if fhat is None:
            fhat = np.fft.rfft2(a)
        _check_radius(float(r), N)
        np.maximum(out, np.clip(_ball_mean_from_hat(fhat, N, float(r)), lo, hi), out=out)
    return MaximalField(source, np.concatenate([[0.0], radii[radii > 0]]), out)


def _weak_sup(values: np.ndarray) -> tuple[float, float]:
    """``sup_lambda lambda * #{v > lambda}`` over ``lambda`` in ``(0, max)``.

    The supremum of the left-continuous staircase is attained as ``lambda``
    increases to a data value ``v``, where the count is ``#{values >= v}``.
    Returns the value as a raw product (not divided by the node count) and
    the maximising level.
    """
    v = np.sort(np.abs(values).ravel())[::-1]
    pos = v > 0
    if not np.any(pos):
        return 0.0, 0.0
    v = v[pos]
    # number of entries >= v[i] (ties share the largest count)
    uniq = np.unique(-v)
    counts = np.searchsorted(-v, uniq, side="right")
    prods = -uniq * counts
    k = int(np.argmax(prods))
    return float(prods[k]), float(-uniq[k])


@dataclass(frozen=True)
class WeakTypeReport:
    """``weak_*`` are ``sup_lambda lambda |{. > lambda}|`` with ``|.|`` the area fraction."""

    weak_maximal: float
    weak_field: float
    l1: float
    ratio: float
    chebyshev_holds: bool
    level_values: dict = field(default_factory=dict)


def weak_type_probe(fld: ScalarField, levels=None, radii=None) -> WeakTypeReport:
    """Weak-type quantities of ``Mf`` and ``|f|`` compared with ``||f||_1``.

    The Chebyshev containment ``lambda |{|f| > lambda}| <= ||f||_1`` is checked
    in exact arithmetic terms: the product ``v * count`` is compared with the
    correctly rounded sum of ``|f|``.
    """
    N = fld.N
    n = N * N
    mf = maximal_function(fld, radii).values
    wm, _ = _weak_sup(mf)
    wf, vf = _weak_sup(fld.samples)
    total = math.fsum(np.abs(fld.samples).ravel().tolist())
    l1 = total / n
    ok = wf <= total
    lv = {}
    for lam in levels or ():
        lv[float(lam)] = float(lam) * float(np.count_nonzero(mf > lam)) / n
    return WeakTypeReport(wm / n, wf / n, l1, (wm / n) / l1 if l1 > 0 else 0.0, bool(ok), lv)


@dataclass(frozen=True)
class IncrementsReport:
    max_ratio: float
    pairs: int
    degenerate: int


def gradient_magnitude(fld: ScalarField) -> np.ndarray:
    gx, gy = spectral_gradient(fld)
    return np.hypot(gx, gy)


def _increment_ratios(f, mdf, N, i0, j0, i1, j1) -> tuple[np.ndarray, int]:
    num = np.abs(f[i0, j0] - f[i1, j1])
    d = torus_distance(i0 / N, j0 / N, i1 / N, j1 / N)
    den = d * (mdf[i0, j0] + mdf[i1, j1])
    degenerate = int(np.count_nonzero((den == 0) & (num > 0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, num / den, 0.0)
    return r, degenerate


def increments_check(
    fld: ScalarField,
    gradient: np.ndarray | None = None,
    pairs: int | None = 100_000,
    rng: np.random.Generator | None = None,
    radii=None,
) -> IncrementsReport:
    """Largest ``|f(x) - f(y)| / (d(x, y) (M|Df|(x) + M|Df|(y)))`` over node pairs.

    ``pairs=None`` scans all ordered pairs of distinct nodes.
    """
    N = fld.N
    grad = gradient_magnitude(fld) if gradient is None else np.asarray(gradient, dtype=float)
    mdf = maximal_function(make_field(grad), radii).values
    f = fld.samples
    worst = 0.0
    degenerate = 0
    if pairs is None:
        I, J = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
        I, J = I.ravel(), J.ravel()
        for a in range(N * N):
            sel = np.arange(N * N) != a
            r, dg = _increment_ratios(f, mdf, N, I[a], J[a], I[sel], J[sel])
            worst = max(worst, float(r.max()))
            degenerate += dg
        count = N * N * (N * N - 1)
    else:
        rng = rng or np.random.default_rng(0)
        i0, j0, i1, j1 = (rng.integers(0, N, size=pairs) for _ in range(4))
        same = (i0 == i1) & (j0 == j1)
        i1 = np.where(same, (i1 + 1) % N, i1)
        r, degenerate = _increment_ratios(f, mdf, N, i0, j0, i1, j1)
        worst = float(r.max())
        count = pairs
    return IncrementsReport(worst, count, degenerate)


# -- the logarithmic functional ---------------------------------------------------


def g_radii(N: int, full_up_to: int = 64) -> np.ndarray:
    """Default radii for the functional: every grid radius for ``N <= full_up_to``,
    otherwise dyadic multiples of the grid step."""
    if N <= full_up_to:
        return default_radii(N)
    cells = 2 ** np.arange(0, int(math.log2(N // 2)) + 1)
    return cells / N


@lru_cache(maxsize=32)
def _offsets(N: int, radii: tuple[float, ...]):
    """Offsets of the largest discrete ball, sorted by length, with membership data."""
    rc = np.round(np.asarray(radii) * N, 12)
    mask, _ = disk_kernel(N, float(rc[-1]))
    A, B = offset_grid(N)
    a = A[mask].astype(np.int64)
    b = B[mask].astype(np.int64)
    d2 = a * a + b * b
    order = np.argsort(d2, kind="stable")
    a, b, d2 = a[order], b[order], d2[order]
    counts = np.array([disk_kernel(N, float(c))[1] for c in rc], dtype=np.int64)
    tol = 1e-9 * np.maximum(1.0, rc * rc)
    lim = rc * rc + tol
    jmin = np.searchsorted(lim, d2, side="left").astype(np.int64)
    return a, b, jmin, counts


def log_ball_means(flow: FlowMap, radii) -> np.ndarray:
    """``(R, N, N)`` array of ball means of ``log(1 + d_T(P x, P y) / r)``."""
    radii = np.asarray(radii, dtype=float)
    a, b, jmin, counts = _offsets(flow.N, tuple(float(r) for r in radii))
    px, py = flow.torus_positions()
    return _kernels.log_ball_averages(
        np.ascontiguousarray(px), np.ascontiguousarray(py), a, b, jmin, radii, counts
    )


@dataclass(frozen=True)
class GResult:
    """Integrand ``g`` and its ``L^p`` norm ``value``.

    ``per_time[m]`` is the integrand restricted to the ``m``-th snapshot, so
    running maxima give the functional on shorter horizons.
    """

    p: float
    horizon: float
    radii: np.ndarray
    times: np.ndarray
    g: np.ndarray
    value: float
    per_time: np.ndarray


def g_functional(flows, p: float = DEFAULT_P, radii=None) -> GResult:
    """Evaluate the functional on forward maps ``x -> P(t, x)`` at snapshot times."""
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if isinstance(flows, FlowMap):
        flows = [flows]
    flows = list(flows)
    N = flows[0].N
    if any(f.N != N for f in flows):
        raise ValueError("flows must share one resolution")
    radii = g_radii(N) if radii is None else np.asarray(radii, dtype=float)
    per_time = np.stack([log_ball_means(f, radii).max(axis=0) for f in flows])
    g = per_time.max(axis=0)
    value = float(np.mean(g**p) ** (1.0 / p))
    times = np.array([abs(f.t - f.seed_time) for f in flows])
    return GResult(p, float(times.max()), radii, times, g, value, per_time)


def identity_flow(N: int) -> FlowMap:
    X, Y = node_coordinates(N)
    return FlowMap(N, 0.0, X, Y)


def time_l1_w1p(budget: RegularityBudget, horizon: float) -> float:
    """``int_0^T ||Du||_{L^p}`` for a budget whose entry is a sup-in-time bound."""
    if math.isnan(budget.w1p_norm):
        raise ValueError("budget does not declare the W^{1,p} norm")
    return budget.w1p_norm * horizon


@dataclass(frozen=True)
class GQuantReport:
    value: float
    denominator: float
    ratio: float
    horizon: float


def gquant_report(gresult: GResult, budget: RegularityBudget) -> GQuantReport:
    """Ratio of the functional to ``1 + ||Du||_{L^1 L^p}`` on the same horizon."""
    den = 1.0 + time_l1_w1p(budget, gresult.horizon)
    return GQuantReport(gresult.value, den, gresult.value / den, gresult.horizon)


# -- Lusin-Lipschitz extraction ---------------------------------------------------


def chebyshev_level(g: np.ndarray, eta: float) -> float:
    """Smallest data value ``lam`` with at most ``eta * n`` entries above it."""
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    v = np.sort(np.asarray(g).ravel())
    idx = math.ceil((1.0 - eta) * v.size) - 1
    if idx < 0:
        raise ValueError("eta leaves no admissible node")
    return float(v[idx])


def _lens_counts(N: int, r_cells: float) -> np.ndarray:
    """``|B(0, r) cap B(d, r)|`` for every minimal-image offset ``d``."""
    mask, _ = disk_kernel(N, r_cells)
    m = np.fft.rfft2(mask.astype(float))
    return np.rint(np.fft.irfft2(m * np.conj(m), s=(N, N))).astype(np.int64)


@lru_cache(maxsize=16)
def overlap_constants(N: int, radii: tuple[float, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Per-offset radius ``r'`` and ball/lens ratio used in the Lusin bound.

    For each offset ``d`` the radius is the largest ``r'`` in ``radii`` with
    ``r' <= |d|``; the ratio is ``|B(r')| / |B(x, r') cap B(x + d, r')|``
    (``inf`` when no such radius exists or the lens is empty).
    """
    A, B = offset_grid(N)
    dist = np.sqrt(A * A + B * B) / N
    rad = np.asarray(radii)
    idx = np.searchsorted(rad, dist + 1e-12, side="right") - 1
    rprime = np.where(idx >= 0, rad[np.maximum(idx, 0)], np.nan)
    ratio = np.full((N, N), np.inf)
    for j in np.unique(idx[idx >= 0]):
        rc = round(float(rad[j]) * N, 12)
        lens = _lens_counts(N, rc)
        count = disk_kernel(N, rc)[1]
        sel = idx == j
        with np.errstate(divide="ignore"):
            ratio[sel] = np.where(lens[sel] > 0, count / np.maximum(lens[sel], 1), np.inf)
    ratio[0, 0] = 1.0
    return rprime, ratio


@dataclass(frozen=True)
class LusinResult:
    eta: float
    threshold: float
    mask: np.ndarray
    excluded_fraction: float
    c2: float
    lip_bound: float
    lip_estimate: float
    pairs: int
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.lip_estimate <= self.lip_bound


def lusin_extract(gresult: GResult, flows, eta: float, pairs: int | None = None, rng=None) -> LusinResult:
    """Good set ``K = {g <= lam_eta}`` and the Lipschitz bound of the flows on it.

    For nodes ``x, x'`` of ``K`` and ``r' <= d(x, x')`` from the radii set,
    averaging the triangle inequality over the lens of ``B(x, r')`` and
    ``B(x', r')`` gives ``log(1 + D / r') <= c2 (g(x) + g(x'))``, hence
    ``D <= d(x, x') exp(2 c2 lam_eta)`` with ``D`` the mapped distance.
    Each pair is checked against its own offset's ratio; ``c2`` reported in
    the bound is the largest finite ratio on the grid.  ``pairs=None`` checks
    every pair of ``K`` exhaustively.
    """
    if isinstance(flows, FlowMap):
        flows = [flows]
    g = gresult.g
    N = g.shape[0]
    lam = chebyshev_level(g, eta)
    mask = g <= lam
    nodes = np.flatnonzero(mask)
    if nodes.size < 2:
        raise ValueError("good set has fewer than two nodes")
    _, ratio = overlap_constants(N, tuple(float(r) for r in gresult.radii))
    finite = ratio[np.isfinite(ratio)]
    c2 = float(finite.max())
    I, J = np.divmod(nodes, N)
    pos = [f.torus_positions() for f in flows]
    worst = 0.0
    checked = 0
    violations = 0

    def scan(ia, ja, ib, jb):
        nonlocal worst, checked, violations
        # per-pair constant: exp(2 c2(d) lam) <= exp(2 c2 lam)
        allowed = np.exp(2.0 * ratio[(ib - ia) % N, (jb - ja) % N] * lam)
        d0 = torus_distance(ia / N, ja / N, ib / N, jb / N)
        for px, py in pos:
            q = torus_distance(px[ia, ja], py[ia, ja], px[ib, jb], py[ib, jb]) / d0
            worst = max(worst, float(q.max()))
            violations += int(np.count_nonzero(q > allowed * (1.0 + 1e-12)))
        checked += np.size(ib)

    if pairs is None:
        for s in range(nodes.size - 1):
            scan(I[s], J[s], I[s + 1 :], J[s + 1 :])
    else:
        rng = rng or np.random.default_rng(0)
        a = rng.integers(0, nodes.size, size=pairs)
        b = rng.integers(0, nodes.size - 1, size=pairs)
        b = np.where(b >= a, b + 1, b)
        scan(I[a], J[a], I[b], J[b])
    bound = math.exp(2.0 * c2 * lam)
    excluded = float(np.count_nonzero(~mask)) / mask.size
    return LusinResult(eta, lam, mask, excluded, c2, bound, worst, checked, violations)


# -- geometric lower bound for the half/half datum --------------------------------


def half_half(N: int) -> ScalarField:
    """``+1`` on ``x < 1/2`` and ``-1`` elsewhere."""
    X, _ = node_coordinates(N)
    return make_field(np.where(X < 0.5, 1.0, -1.0))


def default_eta(kappa_prime: float) -> float:
    """Exclusion budget small enough for the two-point argument at accuracy ``kappa'``."""
    kappa = binary_kappa(kappa_prime)
    return 0.5 * (1.0 / 6.0) / (1.0 + 25.0 / kappa)


@dataclass(frozen=True)
class GeometricConstants:
    """Measured constant chain of the geometric bound.

    ``beta`` and ``big_m`` give the curve ``(1/6) exp(-beta M t)``;
    ``per_time`` is ``(1/6) exp(-2 c2 lam_t)`` with ``lam_t`` the Chebyshev
    level of the functional on ``[0, t]``.
    """

    times: np.ndarray
    eta: float
    threshold: float
    c2: float
    big_m: float
    beta: float
    per_time: np.ndarray
    g_value: float

    def curve(self) -> np.ndarray:
        return np.exp(-self.beta * self.big_m * self.times) / 6.0


def geometric_constants(
    model: VelocityModel,
    horizon: float,
    times,
    dt: float,
    resolution: int = 64,
    eta: float | None = None,
    kappa_prime: float = 1.0 / 3.0,
    p: float = DEFAULT_P,
    radii=None,
    t0: float = 0.0,
) -> GeometricConstants:
    """Measure ``lam``, ``c2`` and ``beta`` from the backward maps ``P(t)^-1``.

    The scalar is carried by the backward maps, ``rho(t, x) = rho0(P(t)^-1 x)``,
    so the functional is evaluated on the maps from each snapshot back to
    ``t0``.  ``M = 1 + ||Du||_{L^inf L^p}`` uses the declared budget (the
    ``W^{1,p}`` entry counts as 0 when infinite or undeclared).
    """
    times = np.asarray(times, dtype=float)
    eta = default_eta(kappa_prime) if eta is None else eta
    n = resolution
    later = [t for t in times if t > t0]
    flows = [identity_flow(n)] + [flow_map(model, float(t), t0, dt, n) for t in later]
    gres = g_functional(flows, p, radii)
    lam = chebyshev_level(gres.g, eta)
    _, ratio = overlap_constants(n, tuple(float(r) for r in gres.radii))
    c2 = float(ratio[np.isfinite(ratio)].max())
    w1p = model.budget.w1p_norm
    big_m = 1.0 + (w1p if math.isfinite(w1p) else 0.0)
    beta = 2.0 * c2 * lam / (horizon * big_m) if horizon > 0 else 0.0
    running = np.maximum.accumulate(gres.per_time, axis=0)
    idx = np.cumsum(times > t0)
    lam_t = np.array([chebyshev_level(running[k], eta) for k in idx])
    per_time = np.exp(-2.0 * c2 * lam_t) / 6.0
    return GeometricConstants(times - t0, eta, lam, c2, big_m, beta, per_time, gres.value)


@dataclass(frozen=True)
class GeometricReport:
    times: np.ndarray
    mix_g: np.ndarray
    mix_g_saturated: np.ndarray
    bound: np.ndarray
    two_point: np.ndarray
    margin: np.ndarray
    constants: GeometricConstants
    passed: bool
    fields: list = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        c = self.constants
        return {
            "value": self.mix_g.tolist(),
            "bound": self.bound.tolist(),
            "margin": self.margin.tolist(),
            "pass": bool(self.passed),
            "times": self.times.tolist(),
            "per_time_bound": c.per_time.tolist(),
            "beta": c.beta,
            "M": c.big_m,
            "c2": c.c2,
            "threshold": c.threshold,
            "eta": c.eta,
        }


def geometric_bound_pipeline(
    model: VelocityModel,
    horizon: float,
    times,
    N: int = 256,
    dt: float = 5e-3,
    kappa_prime: float = 1.0 / 3.0,
    eta: float | None = None,
    estimate_resolution: int = 64,
    p: float = DEFAULT_P,
    radii=None,
    keep_fields: bool = False,
) -> GeometricReport:
    """Advect the half/half datum and compare ``mix_g`` with the exponential bound.

    ``two_point`` is the Lipschitz-flow curve ``(1/4) exp(-L t)`` (zeros when
    ``L`` is infinite).  Passing requires ``mix_g > 0`` and a nonnegative
    margin at every snapshot.
    """
    times = np.asarray(times, dtype=float)
    params = MixParams(kappa_prime)
    datum = half_half(N)
    mg = np.empty(times.size)
    sat = np.zeros(times.size, dtype=bool)
    fields = []
    for m, t in enumerate(times):
        fld = advect(datum, model, float(t), dt) if t > 0 else datum
        res = mix_g(fld, params)
        mg[m], sat[m] = res.epsilon, res.saturated
        if keep_fields:
            fields.append(fld)
    consts = geometric_constants(
        model, horizon, times, dt, estimate_resolution, eta, kappa_prime, p, radii
    )
    bound = consts.curve()
    lip = model.budget.lip
    two_point = np.exp(-lip * times) / 4.0 if math.isfinite(lip) else np.zeros(times.size)
    margin = mg - bound
    passed = bool(np.all(mg > 0) and np.all(margin >= 0))
    return GeometricReport(times, mg, sat, bound, two_point, margin, consts, passed, fields)
