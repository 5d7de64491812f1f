from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixlab.bressan import (
    BressanState,
    BressanVelocity,
    ResolutionError,
    SchemeCompleted,
    bressan_budgets,
    bressan_velocity,
    checker_cells,
    checkerboard,
    evolve_exact,
    lattice_mix_f,
    reverse_exact,
    step_stages,
)
from mixlab.grid import make_field, node_coordinates, rescale
from mixlab.mixing import ball_means
from mixlab.velocity import divergence_field


def parity(k, N):
    X, Y = node_coordinates(N)
    return (-1.0) ** (np.floor(2 ** (k + 1) * X) + np.floor(2 ** (k + 1) * Y))


def test_level0_blocks():
    f = checkerboard(0, 16).samples
    assert np.all(f[:8, :8] == 1) and np.all(f[8:, 8:] == 1)
    assert np.all(f[:8, 8:] == -1) and np.all(f[8:, :8] == -1)
    assert f.mean() == 0


@pytest.mark.parametrize("k,N", [(0, 8), (1, 16), (3, 64), (5, 256)])
def test_checkerboard_parity_formula(k, N):
    assert np.array_equal(checkerboard(k, N).samples, parity(k, N))


def test_resolution_incompatibility():
    with pytest.raises(ResolutionError):
        checkerboard(3, 16)


@pytest.mark.parametrize("k", range(5))
def test_rescale_refines(k):
    assert np.array_equal(rescale(checkerboard(k, 256), 2).samples, checkerboard(k + 1, 256).samples)


@pytest.mark.parametrize("k,N", [(0, 16), (1, 16), (2, 32), (4, 128)])
def test_stages_map_level_to_next(k, N):
    s1, s2 = step_stages(k)
    out = s2.apply(s1.apply(np.asarray(checkerboard(k, N).samples)))
    assert np.array_equal(out, checkerboard(k + 1, N).samples)


def test_stages_are_bijections():
    s1, s2 = step_stages(1)
    ids = np.arange(32 * 32, dtype=float).reshape(32, 32)
    for s in (s1, s2):
        out = s.apply(ids)
        assert np.array_equal(np.sort(out.ravel()), ids.ravel())
        assert np.array_equal(s.apply(out, inverse=True), ids)


@pytest.mark.parametrize("k", range(4))
def test_channel_width(k):
    for s in step_stages(k):
        assert s.channel_width == Fraction(1, 2 ** (k + 2))


@pytest.mark.parametrize("k", range(5))
def test_speeds(k):
    d1, d2 = step_stages(k, "dyadic")
    u1, u2 = step_stages(k, "unit")
    assert d1.sup_norm() == 1 and d2.sup_norm() == 1
    assert u1.sup_norm() == Fraction(1, 2 ** (k + 1))
    assert d1.duration == Fraction(1, 2 ** (k + 2)) and u1.duration == Fraction(1, 2)


def test_budget_laws():
    dy = [bressan_budgets(BressanState.initial(0, "dyadic").advance(k)).bv for k in range(6)]
    un = [bressan_budgets(BressanState.initial(0, "unit").advance(k)).bv for k in range(6)]
    assert all(b / a == 2 for a, b in zip(dy, dy[1:]))
    assert dy[0] == 4  # 4 channels, jumps of size 2 on 2 of the 4 interfaces, unit length
    assert all(b == un[0] for b in un)
    assert un[0] == 2


def test_velocity_models():
    m = BressanVelocity("dyadic")
    assert m.stage_at(0.1).axis == "horizontal"
    assert m.stage_at(0.3).axis == "vertical"
    assert m.stage_at(0.55).level == 1
    with pytest.raises(SchemeCompleted):
        m.evaluate(1.0, 0.1, 0.1)
    u = BressanVelocity("unit")
    a, b = u.evaluate(2.2, np.array([0.1]), np.array([0.01]))
    assert a[0] == pytest.approx(2.0**-3) and b[0] == 0
    model, stage = bressan_velocity(BressanState.initial(0, "unit"), 0.7)
    assert stage.axis == "vertical" and model.timeline == "unit"


@pytest.mark.parametrize("t", [0.1, 0.3, 0.6, 0.8])
def test_divergence_zero(t):
    m = BressanVelocity("dyadic")
    assert np.max(np.abs(divergence_field(m, t, 64, "fd"))) == 0.0


def test_lattice_mix_f_level0_series():
    total = 0.0
    for p in range(1, 200_001, 2):
        total += 2 * (math.pi**2 / 4 - math.pi * math.tanh(math.pi * p / 2) / (2 * p)) / p**4
    assert lattice_mix_f(checker_cells(0)) == pytest.approx(math.sqrt(16 / math.pi**4 * total), rel=1e-8)


def test_evolve_exact_unit_decay():
    state, rows, _ = evolve_exact(BressanState.initial(0, "unit"), 4, 128)
    assert state.level == 4 and state.is_checkerboard()
    for a, b in zip(rows, rows[1:]):
        assert b.mix_f / a.mix_f == pytest.approx(0.5, abs=1e-12)
        assert b.time - a.time == 1.0
    r8 = [r.max_avg_r8 for r in rows]
    assert r8[-1] < r8[0]


def test_evolve_exact_resolution_exhausted():
    with pytest.raises(ResolutionError):
        evolve_exact(BressanState.initial(0), 5, 64)


def test_weak_convergence_diagnostic():
    vals = [np.max(np.abs(ball_means(checkerboard(k, 256).samples, 1 / 8))) for k in range(6)]
    assert vals[-1] < 0.05 < vals[0]


@given(k0=st.integers(0, 2), steps=st.integers(1, 3))
def test_time_reversal(k0, steps):
    N = 2 ** (k0 + steps + 3)
    _, _, fields = evolve_exact(BressanState.initial(k0), steps, N, keep_fields=True)
    back = reverse_exact(np.asarray(fields[-1].samples), k0 + steps, steps)
    assert np.array_equal(back, checkerboard(k0, N).samples)


def test_state_render_and_time():
    st0 = BressanState.initial(0, "dyadic")
    half = st0.advance_stage()
    assert half.stage == "after_first_split" and half.time == Fraction(1, 4)
    assert st0.advance(2).time == Fraction(3, 4)
    assert make_field(st0.render(16).samples).mean == 0
