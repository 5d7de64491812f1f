"""Exact slice-and-dice evolution of the +-1 checkerboard.

Level ``k`` is the checkerboard with squares of side ``2^-(k+1)``.  One step
refines level ``k`` into level ``k + 1`` by two piecewise-constant shears
acting on channels of width ``w = 2^-(k+2)``:

* stage 1, horizontal channels ``b = floor(y / w)`` move by
  ``(+1, -1, -1, +1)[b mod 4]`` cells in x;
* stage 2, vertical channels ``a = floor(x / w)`` move by
  ``(+1, -1, 0, 0)[a mod 4]`` cells in y.

Both stages are lattice permutations, so sample arrays are evolved exactly.
Each stage lasts half of the step: ``2^-(k+2)`` in the dyadic timeline
(step ``k`` occupies ``[1 - 2^-k, 1 - 2^-(k+1))``) and ``1/2`` in the unit
timeline (step ``k`` occupies ``[k, k + 1)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .grid import FieldError, ScalarField, make_field
from .mixing import MixParams, ball_means, mix_g
from .velocity import RegularityBudget, VelocityModel

STAGE1_SHIFTS = (1, -1, -1, 1)
STAGE2_SHIFTS = (1, -1, 0, 0)
TIMELINES = ("dyadic", "unit")


class ResolutionError(FieldError):
    pass


class SchemeCompleted(ValueError):
    """Raised for dyadic-timeline times ``t >= 1``."""


def checker_cells(k: int) -> np.ndarray:
    """Parity lattice of level ``k``: ``+1`` on the cell containing the origin."""
    n = 2 ** (k + 1)
    a = np.arange(n)
    return np.where((a[:, None] + a[None, :]) % 2 == 0, 1, -1).astype(np.int8)


def _require_resolution(k: int, N: int) -> None:
    if N % 2 ** (k + 2) != 0:
        raise ResolutionError(f"N={N} is not a multiple of 2^(k+2)={2 ** (k + 2)} for level {k}")


def checkerboard(k: int, N: int) -> ScalarField:
    """Sample level ``k`` at the nodes: ``(-1)^(floor(2^(k+1) x) + floor(2^(k+1) y))``."""
    if k < 0:
        raise ValueError("level must be nonnegative")
    _require_resolution(k, N)
    s = (np.arange(N) * 2 ** (k + 1)) // N
    vals = np.where((s[:, None] + s[None, :]) % 2 == 0, 1.0, -1.0)
    return make_field(vals)


def step_start(k: int, timeline: str) -> Fraction:
    if timeline == "dyadic":
        return 1 - Fraction(1, 2**k)
    if timeline == "unit":
        return Fraction(k)
    raise ValueError(f"unknown timeline {timeline!r}")


def stage_duration(k: int, timeline: str) -> Fraction:
    return Fraction(1, 2 ** (k + 2)) if timeline == "dyadic" else Fraction(1, 2)


@dataclass(frozen=True)
class ShearStage:
    """One lattice-commensurate shear of step ``level``.

    ``shifts[c % 4]`` is the displacement, in channel widths, of channel
    ``c``; horizontal stages move material in x along horizontal channels.
    """

    level: int
    axis: str
    shifts: tuple[int, ...]
    start: Fraction
    end: Fraction

    @property
    def channel_width(self) -> Fraction:
        return Fraction(1, 2 ** (self.level + 2))

    @property
    def duration(self) -> Fraction:
        return self.end - self.start

    @property
    def speed_unit(self) -> Fraction:
        return self.channel_width / self.duration

    def displacement(self, channel: int) -> Fraction:
        return self.shifts[channel % 4] * self.channel_width

    def speed(self, channel: int) -> Fraction:
        return self.shifts[channel % 4] * self.speed_unit

    def apply(self, samples: np.ndarray, inverse: bool = False) -> np.ndarray:
        """Permute node samples (any resolution multiple of ``2^(level+2)``)."""
        N = samples.shape[0]
        n = 2 ** (self.level + 2)
        _require_resolution(self.level, N)
        cell = N // n
        out = np.array(samples, copy=True)
        chan = (np.arange(N) // cell) % 4
        sign = -1 if inverse else 1
        for r, d in enumerate(self.shifts):
            if d == 0:
                continue
            sel = chan == r
            if self.axis == "horizontal":
                out[:, sel] = np.roll(out[:, sel], sign * d * cell, axis=0)
            else:
                out[sel, :] = np.roll(out[sel, :], sign * d * cell, axis=1)
        return out

    def velocity(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        w = float(self.channel_width)
        unit = float(self.speed_unit)
        table = np.array(self.shifts, dtype=float) * unit
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.axis == "horizontal":
            c = np.floor(np.mod(y, 1.0) / w).astype(np.int64) % 4
            return table[c], np.zeros(y.shape)
        c = np.floor(np.mod(x, 1.0) / w).astype(np.int64) % 4
        return np.zeros(x.shape), table[c]

    def bv_seminorm(self) -> Fraction:
        """Sum over channel interfaces of ``|jump| * length`` (lines of length 1)."""
        n = 2 ** (self.level + 2)
        total = Fraction(0)
        for c in range(n):
            total += abs(self.speed(c) - self.speed((c + 1) % n))
        return total

    def sup_norm(self) -> Fraction:
        return max(abs(s) for s in self.shifts) * self.speed_unit

    def kinetic(self) -> float:
        frac = sum(1 for s in self.shifts if s != 0) / len(self.shifts)
        return math.sqrt(frac) * float(self.sup_norm())


def step_stages(k: int, timeline: str = "dyadic") -> tuple[ShearStage, ShearStage]:
    if k < 0:
        raise ValueError("level must be nonnegative")
    t0 = step_start(k, timeline)
    d = stage_duration(k, timeline)
    return (
        ShearStage(k, "horizontal", STAGE1_SHIFTS, t0, t0 + d),
        ShearStage(k, "vertical", STAGE2_SHIFTS, t0 + d, t0 + 2 * d),
    )


@dataclass(frozen=True)
class BressanState:
    """Exact configuration of the scheme.

    ``cells`` is the parity lattice: ``2^(k+1)`` per side for ``stage="whole"``
    and ``2^(k+2)`` per side after the first split of step ``k``.
    """

    level: int
    stage: str
    timeline: str
    cells: np.ndarray

    @classmethod
    def initial(cls, level: int = 0, timeline: str = "unit") -> "BressanState":
        if timeline not in TIMELINES:
            raise ValueError(f"unknown timeline {timeline!r}")
        return cls(level, "whole", timeline, checker_cells(level))

    @property
    def time(self) -> Fraction:
        t = step_start(self.level, self.timeline)
        if self.stage == "after_first_split":
            t += stage_duration(self.level, self.timeline)
        return t

    def render(self, N: int) -> ScalarField:
        n = self.cells.shape[0]
        if N % n:
            raise ResolutionError(f"N={N} is not a multiple of the lattice size {n}")
        idx = np.arange(N) // (N // n)
        return make_field(self.cells[np.ix_(idx, idx)].astype(np.float64))

    def advance_stage(self) -> "BressanState":
        s1, s2 = step_stages(self.level, self.timeline)
        if self.stage == "whole":
            fine = np.kron(self.cells, np.ones((2, 2), dtype=np.int8))
            return BressanState(self.level, "after_first_split", self.timeline, s1.apply(fine))
        return BressanState(self.level + 1, "whole", self.timeline, s2.apply(self.cells))

    def advance(self, steps: int = 1) -> "BressanState":
        st = self
        for _ in range(2 * steps):
            st = st.advance_stage()
        return st

    def is_checkerboard(self) -> bool:
        return self.stage == "whole" and np.array_equal(self.cells, checker_cells(self.level))


class BressanVelocity(VelocityModel):
    """Velocity of the scheme started from level ``start_level`` at its step time."""

    kind = "bressan"
    exact_per_step = True

    def __init__(self, timeline: str = "unit", start_level: int = 0, p: float = 2.0):
        if timeline not in TIMELINES:
            raise ValueError(f"unknown timeline {timeline!r}")
        self.timeline = timeline
        self.start_level = start_level
        s1, s2 = step_stages(start_level, timeline)
        sup = float(max(s1.sup_norm(), s2.sup_norm()))
        kin = max(s1.kinetic(), s2.kinetic())
        bv = float(max(s1.bv_seminorm(), s2.bv_seminorm())) if timeline == "unit" else math.inf
        super().__init__(RegularityBudget(math.inf, kin, math.inf, bv, sup, p, math.inf))

    def stage_at(self, t: float) -> ShearStage:
        if self.timeline == "dyadic":
            if t >= 1.0:
                raise SchemeCompleted("dyadic scheme is complete at t = 1")
            k = max(0, math.floor(-math.log2(1.0 - t) + 1e-12))
        else:
            if t < 0:
                raise ValueError("time must be nonnegative")
            k = math.floor(t + 1e-12)
        k = max(k, self.start_level)
        s1, s2 = step_stages(k, self.timeline)
        if t < float(s1.start):
            k -= 1
            s1, s2 = step_stages(k, self.timeline)
        return s1 if t < float(s1.end) else s2

    def evaluate(self, t, x, y):
        return self.stage_at(float(t)).velocity(x, y)

    def breakpoints(self, t0, t1):
        lo, hi = min(t0, t1), max(t0, t1)
        out = []
        k = self.start_level
        while True:
            s1, s2 = step_stages(k, self.timeline)
            for b in (s1.start, s1.end):
                if lo + 1e-12 < float(b) < hi - 1e-12:
                    out.append(float(b))
            if float(s2.end) >= hi:
                break
            k += 1
            if k > 60:
                break
        return out

    def describe(self):
        return {"kind": self.kind, "timeline": self.timeline, "start_level": self.start_level}


def bressan_velocity(state: BressanState, t: float) -> tuple:
    """Velocity model of ``state``'s timeline and its stage active at ``t``."""
    model = BressanVelocity(state.timeline)
    return model, model.stage_at(t)


@dataclass(frozen=True)
class BressanBudget:
    level: int
    timeline: str
    bv: Fraction
    sup_norm: Fraction
    kinetic: float

    def as_regularity(self) -> RegularityBudget:
        return RegularityBudget(math.inf, self.kinetic, math.inf, float(self.bv), float(self.sup_norm), 2.0, math.inf)


def bressan_budgets(state: BressanState) -> BressanBudget:
    """Exact BV and ``L^inf`` of step ``state.level``, maximised over its two stages."""
    s1, s2 = step_stages(state.level, state.timeline)
    return BressanBudget(
        state.level,
        state.timeline,
        max(s1.bv_seminorm(), s2.bv_seminorm()),
        max(s1.sup_norm(), s2.sup_norm()),
        max(s1.kinetic(), s2.kinetic()),
    )


# -- exact functional mixing scale of lattice configurations -------------------

ALIAS_CUTOFF = 400


def _sinc2(z: np.ndarray) -> np.ndarray:
    return np.sinc(z) ** 2


def lattice_mix_f(cells: np.ndarray, alias_cutoff: int = ALIAS_CUTOFF) -> float:
    """``H^-1`` norm of the piecewise-constant field with the given cell values.

    The Fourier series of the continuum field is summed class by class modulo
    the lattice size ``n``; within a class only the sinc factors and ``|k|``
    change, so the alias sum is taken in lattice units ``z = k / n`` with
    ``|m| <= alias_cutoff``.  The truncation is relative to ``n``, hence
    self-similar configurations give exactly self-similar values.
    """
    n = cells.shape[0]
    C = np.fft.fft2(cells.astype(np.float64))
    power = np.abs(C) ** 2
    m = np.arange(-alias_cutoff, alias_cutoff + 1, dtype=np.float64)
    total = 0.0
    thresh = 1e-12 * n**4
    qs = np.argwhere(power > thresh)
    for q1, q2 in qs:
        x1 = q1 / n if q1 <= n // 2 else q1 / n - 1.0
        x2 = q2 / n if q2 <= n // 2 else q2 / n - 1.0
        z1 = (x1 + m) if x1 != 0 else np.zeros(1)
        z2 = (x2 + m) if x2 != 0 else np.zeros(1)
        w1 = _sinc2(z1)
        w2 = _sinc2(z2)
        zz = z1[:, None] ** 2 + z2[None, :] ** 2
        if x1 == 0 and x2 == 0:
            continue
        total += power[q1, q2] * float(np.sum(w1[:, None] * w2[None, :] / zz))
    return math.sqrt(total / n**6)


# -- evolution with bookkeeping ------------------------------------------------


@dataclass(frozen=True)
class DecayRow:
    step: int
    level: int
    time: float
    mix_f: float
    mix_f_grid: float
    mix_g: float
    mix_g_bracket: float
    mix_g_saturated: bool
    bv: Fraction
    sup_norm: Fraction
    max_avg_r8: float


def _row(step: int, state: BressanState, fld: ScalarField, params: MixParams) -> DecayRow:
    from .mixing import mix_f as grid_mix_f

    g = mix_g(fld, params)
    b = bressan_budgets(state)
    return DecayRow(
        step,
        state.level,
        float(state.time),
        lattice_mix_f(state.cells),
        grid_mix_f(fld),
        g.epsilon,
        g.bracket,
        g.saturated,
        b.bv,
        b.sup_norm,
        float(np.max(np.abs(ball_means(fld.samples, 1.0 / 8.0)))),
    )


def evolve_exact(
    state: BressanState,
    steps: int,
    N: int,
    params: MixParams | None = None,
    keep_fields: bool = False,
):
    """Advance ``steps`` full steps by exact permutations of the sampled field.

    Returns ``(final_state, rows, fields)``; ``rows`` holds one
    :class:`DecayRow` per level reached (the initial one included) and
    ``fields`` the rendered fields when ``keep_fields`` is set.  The evolved
    samples are checked against the parity formula after every step.
    """
    if state.stage != "whole":
        raise ValueError("evolve_exact starts from a completed step")
    _require_resolution(state.level + steps, N)
    params = params or MixParams()
    samples = state.render(N).samples
    rows = [_row(0, state, make_field(samples), params)]
    fields = [make_field(samples)] if keep_fields else []
    for n in range(1, steps + 1):
        s1, s2 = step_stages(state.level, state.timeline)
        samples = s2.apply(s1.apply(samples))
        state = state.advance(1)
        fld = make_field(samples)
        if not np.array_equal(fld.samples, checkerboard(state.level, N).samples):
            raise AssertionError(f"evolved field differs from level {state.level} checkerboard")
        rows.append(_row(n, state, fld, params))
        if keep_fields:
            fields.append(fld)
    return state, rows, fields


def reverse_exact(samples: np.ndarray, level: int, steps: int, timeline: str = "unit") -> np.ndarray:
    """Undo ``steps`` steps that ended at ``level`` by inverse permutations."""
    out = np.array(samples, copy=True)
    for k in range(level - 1, level - steps - 1, -1):
        s1, s2 = step_stages(k, timeline)
        out = s1.apply(s2.apply(out, inverse=True), inverse=True)
    return out
