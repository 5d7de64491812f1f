from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixlab.bressan import checkerboard
from mixlab.estimates import half_half
from mixlab.grid import FieldError, make_field, random_band_limited, rescale
from mixlab.mixing import (
    MixParams,
    ball_means,
    binary_kappa,
    default_radii,
    disk_kernel,
    kappa_prime_from_binary,
    mix_f,
    mix_g,
)


def checkerboard_series(cutoff: int = 200_001) -> float:
    """H^-1 norm of the level-0 checkerboard from its product Fourier series.

    Coefficients are 4/(pi^2 k1 k2) on odd modes; the inner odd sum is done
    in closed form with sum 1/(q^2 + p^2) = pi tanh(pi p / 2) / (2 p).
    """
    total = 0.0
    for p in range(1, cutoff, 2):
        inner = math.pi**2 / 4 - math.pi * math.tanh(math.pi * p / 2) / (2 * p)
        total += 2 * inner / p**4
    return math.sqrt(16 / math.pi**4 * total)


def brute_ball_means(values: np.ndarray, r_cells: float) -> np.ndarray:
    N = values.shape[0]
    out = np.zeros_like(values)
    rng_ = range(-N // 2, N // 2)
    offs = [(a, b) for a in rng_ for b in rng_ if a * a + b * b <= r_cells * r_cells]
    for i in range(N):
        for j in range(N):
            out[i, j] = np.mean([values[(i + a) % N, (j + b) % N] for a, b in offs])
    return out


@pytest.mark.parametrize("r,count", [(1, 5), (2, 13), (3, 29), (4, 49), (5, 81), (10, 317)])
def test_disk_kernel_counts_lattice_points(r, count):
    # Gauss circle numbers
    assert disk_kernel(64, float(r))[1] == count


@pytest.mark.parametrize("r_cells", [1, 2, 3, 5, 8])
def test_ball_means_match_direct_sum(rng, r_cells):
    v = rng.standard_normal((16, 16))
    assert np.allclose(ball_means(v, r_cells / 16), brute_ball_means(v, r_cells), atol=1e-12)


def test_ball_means_constant_exact():
    v = np.full((32, 32), 0.7)
    assert np.array_equal(ball_means(v, 5 / 32), v)


def test_ball_means_radius_range():
    with pytest.raises(FieldError):
        ball_means(np.zeros((16, 16)), 0.6)


def test_kappa_relation():
    assert kappa_prime_from_binary(1 / 3) == pytest.approx(1 / 3)
    assert binary_kappa(kappa_prime_from_binary(0.2)) == pytest.approx(0.2)


def test_mix_f_checkerboard_matches_series():
    v0 = checkerboard_series()
    # O(1/N^2) aliasing of the sampled discontinuous field
    assert mix_f(checkerboard(0, 512)) == pytest.approx(v0, rel=5e-5)


def test_mix_f_single_mode():
    f = make_field(2 * np.cos(2 * np.pi * np.arange(64) / 64)[:, None] * np.ones((1, 64)))
    assert mix_f(f) == pytest.approx(math.sqrt(2), rel=1e-12)


def test_mix_g_matches_direct_scan():
    f = half_half(32)
    direct = None
    for r in default_radii(32):
        worst = np.max(np.abs(brute_ball_means(np.asarray(f.samples), r * 32)))
        if worst <= (1 / 3) * 1.0 + 1e-12:
            direct = r
            break
    assert mix_g(f).epsilon == direct


def test_mix_g_half_half_in_range():
    res = mix_g(half_half(256))
    assert 1 / 8 < res.epsilon < 1 / 2
    assert not res.saturated
    assert res.bracket == pytest.approx(1 / 256)


def test_mix_g_saturates_for_constant_sign():
    f = make_field(np.ones((32, 32)))
    res = mix_g(f)
    assert res.saturated and res.epsilon == 0.5


@pytest.mark.parametrize("level", [0, 1, 2, 3, 4])
def test_mix_g_checkerboard_halves(level):
    a = mix_g(checkerboard(level, 256)).epsilon
    b = mix_g(checkerboard(level + 1, 256)).epsilon
    assert abs(b - a / 2) <= 1 / 256


@given(seed=st.integers(0, 2**31))
def test_mix_g_rescale_within_grid_steps(seed):
    f = random_band_limited(64, np.random.default_rng(seed), kmax=3)
    a = mix_g(f).epsilon
    b = mix_g(rescale(f, 2)).epsilon
    if not mix_g(f).saturated:
        assert abs(b - a / 2) <= 2 / 64


def test_custom_radii_validation():
    with pytest.raises(ValueError):
        MixParams(radii=(0.2, 0.1))
    with pytest.raises(ValueError):
        MixParams(kappa_prime=1.0)
    res = mix_g(half_half(64), MixParams(radii=(0.25, 0.5)))
    assert res.epsilon in (0.25, 0.5)
