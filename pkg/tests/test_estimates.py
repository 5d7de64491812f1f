from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixlab.estimates import (
    chebyshev_level,
    default_eta,
    g_functional,
    geometric_bound_pipeline,
    gquant_report,
    half_half,
    identity_flow,
    increments_check,
    log_ball_means,
    lusin_extract,
    maximal_function,
    overlap_constants,
    weak_type_probe,
)
from mixlab.grid import make_field, node_coordinates, random_coefficients, synthesize
from mixlab.transport import flow_map
from mixlab.velocity import alternating_shear, steady_shear, translation

LOG2 = math.log(2.0)


def corpus(N, count, seed=0, kmax=4):
    rng = np.random.default_rng(seed)
    return [synthesize(random_coefficients(kmax, rng), N) for _ in range(count)]


def ball_offsets(N, r_cells):
    a = np.arange(-(N // 2), N // 2)
    A, B = np.meshgrid(a, a, indexing="ij")
    sel = A * A + B * B <= r_cells * r_cells + 1e-9 * max(1.0, r_cells**2)
    return A[sel], B[sel]


# -- maximal function ---------------------------------------------------------


@pytest.mark.parametrize("c", [0.0, 1.5, -2.25])
def test_maximal_constant(c):
    mf = maximal_function(make_field(np.full((16, 16), c)))
    assert np.all(mf.values == abs(c))


def test_maximal_disk_indicator_against_direct_scan():
    N = 128
    X, Y = node_coordinates(N)
    ind = ((X - 0.5) ** 2 + (Y - 0.5) ** 2 <= (1 / 8) ** 2 + 1e-12).astype(float)
    mf = maximal_function(make_field(ind)).values
    assert np.all(mf[ind == 1] == 1.0)
    # direct scan along the ray y = 1/2, x > 1/2 + 1/8
    i_out = np.arange(N // 2 + N // 8 + 1, N)
    direct = []
    for i in i_out:
        best = 0.0
        for rc in range(1, N // 2 + 1):
            a, b = ball_offsets(N, rc)
            best = max(best, ind[(i + a) % N, (N // 2 + b) % N].mean())
        direct.append(best)
    direct = np.array(direct)
    np.testing.assert_allclose(mf[i_out, N // 2], direct, atol=1e-12)
    # decreasing in the distance until the torus wraps back toward the disk
    half = direct[: (N // 2 - N // 8) // 2]
    assert np.all(np.diff(half) < 0)


@settings(max_examples=15)
@given(seed=st.integers(0, 10_000), c=st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3))
def test_maximal_properties(seed, c):
    f = corpus(32, 1, seed)[0]
    mf = maximal_function(f).values
    assert np.all(mf >= np.abs(f.samples))
    # homogeneity
    np.testing.assert_allclose(maximal_function(make_field(c * f.samples)).values, abs(c) * mf, rtol=1e-12, atol=1e-12)
    # monotonicity: |f| <= |f| + |h|
    h = corpus(32, 1, seed + 1)[0]
    big = maximal_function(make_field(np.abs(f.samples) + np.abs(h.samples))).values
    assert np.all(big >= mf - 1e-12)


def test_strong_ratio_stable_under_refinement():
    ratios = {}
    for N in (32, 64):
        vals = []
        for f in corpus(N, 20, seed=3):
            mf = maximal_function(f).values
            vals.append(np.sqrt(np.mean(mf**2) / np.mean(f.samples**2)))
        ratios[N] = max(vals)
        assert np.all(np.isfinite(vals))
    assert ratios[64] == pytest.approx(ratios[32], rel=0.10)


# -- weak type ----------------------------------------------------------------


def test_weak_constant():
    rep = weak_type_probe(make_field(np.full((16, 16), -1.25)))
    assert rep.weak_maximal == 1.25 and rep.weak_field == 1.25
    assert rep.ratio == 1.0 and rep.chebyshev_holds


def test_weak_single_spike_direct():
    N = 64
    f = np.zeros((N, N))
    f[10, 20] = 3.0
    rep = weak_type_probe(make_field(f))
    # direct: Mf at offset d from the spike is max over rc >= |d| of 3/|B(rc)|
    counts = {rc: ball_offsets(N, rc)[0].size for rc in range(0, N // 2 + 1)}
    A, B = np.meshgrid(np.fft.fftfreq(N, 1 / N), np.fft.fftfreq(N, 1 / N), indexing="ij")
    dist = np.sqrt(A**2 + B**2)
    mf = np.zeros((N, N))
    for rc, cnt in counts.items():
        inside = dist <= rc + 1e-12
        mf = np.where(inside, np.maximum(mf, 3.0 / cnt), mf)
    vals = np.sort(mf.ravel())[::-1]
    weak = max(v * np.count_nonzero(mf >= v) for v in np.unique(vals) if v > 0) / N**2
    assert rep.weak_maximal == pytest.approx(weak, rel=1e-12)
    assert rep.l1 == 3.0 / N**2
    assert 1.0 <= rep.ratio < 10.0


@settings(max_examples=20)
@given(seed=st.integers(0, 10_000))
def test_chebyshev_containment(seed):
    f = corpus(32, 1, seed)[0]
    rep = weak_type_probe(f)
    assert rep.chebyshev_holds and rep.weak_field <= rep.l1 * (1 + 1e-15)


# -- increments ---------------------------------------------------------------


def test_increments_sin_exhaustive():
    f = make_field(np.sin(2 * np.pi * node_coordinates(32)[0]))
    rep = increments_check(f, pairs=None)
    assert rep.max_ratio <= 1.0 and rep.degenerate == 0
    assert rep.pairs == 1024 * 1023


def test_increments_constant():
    rep = increments_check(make_field(np.full((16, 16), 2.0)), pairs=1000)
    assert rep.max_ratio == 0.0


@pytest.mark.slow
def test_increments_refinement():
    worst = {}
    for N in (128, 256):
        worst[N] = max(
            increments_check(f, pairs=20_000, rng=np.random.default_rng(k)).max_ratio
            for k, f in enumerate(corpus(N, 100, seed=5))
        )
    assert max(worst.values()) < 1.0
    assert worst[256] == pytest.approx(worst[128], rel=0.10)


# -- the logarithmic functional -----------------------------------------------


def brute_log_means(flow, radii):
    N = flow.N
    px, py = flow.torus_positions()
    out = np.zeros((len(radii), N, N))
    for k, r in enumerate(radii):
        a, b = ball_offsets(N, r * N)
        for i in range(N):
            for j in range(N):
                dx = px[(i + a) % N, (j + b) % N] - px[i, j]
                dy = py[(i + a) % N, (j + b) % N] - py[i, j]
                dx -= np.round(dx)
                dy -= np.round(dy)
                out[k, i, j] = np.mean(np.log1p(np.hypot(dx, dy) / r))
    return out


def test_log_ball_means_brute_force():
    N = 16
    fl = flow_map(steady_shear(1.0), 0.0, 0.3, 0.01, N)
    radii = np.arange(1, N // 2 + 1) / N
    np.testing.assert_allclose(log_ball_means(fl, radii), brute_log_means(fl, radii), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("N", [16, 32, 64])
def test_identity_functional(N):
    res = g_functional(identity_flow(N))
    assert np.all(res.g >= 0)
    assert np.ptp(res.g) <= 1e-10
    assert res.value <= LOG2 + 1e-10


def test_translation_equals_identity():
    N = 32
    fl = flow_map(translation((0.3, -0.7)), 0.0, 1.0, 0.01, N)
    a = g_functional(fl).g
    b = g_functional(identity_flow(N)).g
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_shear_functional_lipschitz_bound():
    N = 128
    model = steady_shear(1.0)
    flows = [identity_flow(N)] + [flow_map(model, 0.0, t, 5e-3, N) for t in (0.25, 0.5, 0.75, 1.0)]
    res = g_functional(flows)
    assert np.all(res.g <= 2 * math.pi + LOG2)
    assert res.value <= 2 * math.pi + LOG2
    assert res.value > LOG2  # the shear stretches


def test_gquant_identity_and_doubling():
    budget = steady_shear(1.0).budget
    g0 = g_functional(identity_flow(32))
    # horizon 0 for the identity: the denominator is 1
    assert gquant_report(g0, budget).ratio <= LOG2 + 1e-12
    model = steady_shear(1.0)
    r = {}
    for T in (1.0, 2.0):
        flows = [flow_map(model, 0.0, t, 5e-3, 32) for t in np.linspace(T / 4, T, 4)]
        r[T] = gquant_report(g_functional(flows), budget).ratio
    assert 0.5 < r[2.0] / r[1.0] < 2.0


def test_gquant_alternating():
    model = alternating_shear(1.0, 0.5)
    flows = [flow_map(model, 0.0, t, 5e-3, 32) for t in (1.0, 2.0, 3.0, 4.0)]
    rep = gquant_report(g_functional(flows), model.budget)
    assert math.isfinite(rep.ratio) and rep.ratio > 0 and rep.horizon == 4.0


def test_gquant_requires_budget():
    from mixlab.velocity import RegularityBudget

    with pytest.raises(ValueError):
        gquant_report(g_functional(identity_flow(16)), RegularityBudget(1.0, 1.0, 1.0, 1.0, 1.0))


# -- Lusin extraction ----------------------------------------------------------


def test_lusin_identity():
    g = g_functional(identity_flow(32))
    res = lusin_extract(g, identity_flow(32), 0.3, pairs=None)
    assert res.lip_estimate == pytest.approx(1.0, abs=1e-12)
    assert res.passed and res.violations == 0


def test_lusin_shear_exhaustive():
    N = 64
    model = steady_shear(1.0)
    flows = [flow_map(model, 0.0, t, 5e-3, N) for t in (0.25, 0.5, 0.75, 1.0)]
    g = g_functional(flows)
    res = lusin_extract(g, flows, 0.1, pairs=None)
    k = int(res.mask.sum())
    assert res.pairs == k * (k - 1) // 2
    assert res.violations == 0 and res.passed
    assert res.excluded_fraction <= 0.1 + 1 / N**2
    assert np.count_nonzero(g.g > res.threshold) <= 0.1 * N * N + 1


def test_lusin_threshold_monotone_and_empty():
    rng = np.random.default_rng(2)
    g = rng.random((16, 16))
    etas = [0.05, 0.2, 0.5, 0.8, 0.95]
    levels = [chebyshev_level(g, e) for e in etas]
    assert all(b <= a for a, b in zip(levels, levels[1:]))
    with pytest.raises(ValueError):
        chebyshev_level(g, 1.0)


@settings(max_examples=25)
@given(eta=st.floats(0.01, 0.99), seed=st.integers(0, 1000))
def test_chebyshev_consistency(eta, seed):
    g = np.random.default_rng(seed).random((12, 12))
    lam = chebyshev_level(g, eta)
    assert np.count_nonzero(g > lam) <= eta * g.size + 1


def test_overlap_constants_shape():
    N = 32
    radii = tuple(np.arange(1, N // 2 + 1) / N)
    rprime, ratio = overlap_constants(N, radii)
    assert ratio[0, 0] == 1.0
    fin = ratio[np.isfinite(ratio)]
    assert np.all(fin >= 1.0)
    # the radius used never exceeds the offset length
    A, B = np.meshgrid(np.fft.fftfreq(N, 1 / N), np.fft.fftfreq(N, 1 / N), indexing="ij")
    d = np.hypot(A, B) / N
    ok = np.isfinite(rprime)
    assert np.all(rprime[ok] <= d[ok] + 1e-12)


# -- geometric pipeline ---------------------------------------------------------


def test_half_half_and_eta():
    f = half_half(8)
    assert f.samples[:4].min() == 1 and f.samples[4:].max() == -1
    assert 0 < default_eta(1 / 3) < 1 / 12


def test_pipeline_translation():
    rep = geometric_bound_pipeline(
        translation((0.25, 0.0)), 2.0, [0.0, 1.0, 2.0], N=64, dt=0.01, estimate_resolution=32
    )
    assert np.all(rep.mix_g == rep.mix_g[0]) and rep.passed


def test_pipeline_steady_shear():
    rep = geometric_bound_pipeline(
        steady_shear(1.0), 1.0, [0.0, 0.5, 1.0], N=64, dt=0.01, estimate_resolution=32
    )
    assert rep.passed and np.all(rep.mix_g > 0)
    assert np.all(np.diff(rep.bound) <= 0)
    d = rep.as_dict()
    assert {"value", "bound", "margin", "pass"} <= set(d)
