"""Geometric and functional mixing scales."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import FieldError, ScalarField, sobolev_norm

DEFAULT_KAPPA_PRIME = 1.0 / 3.0


def kappa_prime_from_binary(kappa: float) -> float:
    """Accuracy for +-1 data: a ball with phase fractions in ``[kappa, 1-kappa]``
    has average in ``[-(1-2 kappa), 1-2 kappa]``."""
    return 1.0 - 2.0 * kappa


def binary_kappa(kappa_prime: float) -> float:
    return 0.5 * (1.0 - kappa_prime)


def default_radii(N: int) -> np.ndarray:
    return np.arange(1, N // 2 + 1) / N


@dataclass(frozen=True)
class MixParams:
    """Accuracy and candidate radii for the geometric mixing scale."""

    kappa_prime: float = DEFAULT_KAPPA_PRIME
    radii: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.kappa_prime < 1.0:
            raise ValueError(f"kappa_prime must lie in (0, 1), got {self.kappa_prime}")
        if self.radii is not None:
            r = np.asarray(self.radii, dtype=float)
            if r.size and (np.any(np.diff(r) <= 0) or r[0] <= 0 or r[-1] > 0.5):
                raise ValueError("radii must be strictly increasing in (0, 1/2]")

    def radii_for(self, N: int) -> np.ndarray:
        if self.radii is None:
            return default_radii(N)
        return np.asarray(self.radii, dtype=float)


@dataclass(frozen=True)
class DiskAverageField:
    radius: float
    averages: np.ndarray


@dataclass(frozen=True)
class MixGResult:
    """Outcome of the radius scan: ``epsilon`` is resolved to ``bracket``."""

    epsilon: float
    bracket: float
    saturated: bool
    max_ratio: float = field(default=0.0)


def offset_grid(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Minimal-image integer offsets, indexed like the sample array."""
    a = np.fft.fftfreq(N, d=1.0 / N).astype(np.int64)
    return np.meshgrid(a, a, indexing="ij")


def _cells(r: float, N: int) -> float:
    return r * N


@lru_cache(maxsize=512)
def disk_kernel(N: int, r_cells: float) -> tuple[np.ndarray, int]:
    """Indicator of the discrete ball ``{d : |d| <= r}`` in grid units and its size."""
    A, B = offset_grid(N)
    d2 = A * A + B * B
    tol = 1e-9 * max(1.0, r_cells * r_cells)
    mask = d2 <= r_cells * r_cells + tol
    return mask, int(mask.sum())


@lru_cache(maxsize=512)
def _kernel_hat(N: int, r_cells: float) -> tuple[np.ndarray, int]:
    mask, count = disk_kernel(N, r_cells)
    kh = np.fft.rfft2(mask.astype(np.float64))
    kh.setflags(write=False)
    return kh, count


def _check_radius(r: float, N: int) -> None:
    if not (1.0 / N - 1e-12 <= r <= 0.5 + 1e-12):
        raise FieldError(f"radius {r} outside [1/N, 1/2] for N={N}")


def _ball_mean_from_hat(fhat: np.ndarray, N: int, r: float) -> np.ndarray:
    kh, count = _kernel_hat(N, round(_cells(r, N), 12))
    return np.fft.irfft2(fhat * kh, s=(N, N)) / count


def ball_means(values: np.ndarray, r: float) -> np.ndarray:
    """Mean of ``values`` over the discrete ball around every node.

    Constant inputs return the constant exactly; other outputs are clipped to
    the data range, which removes FFT round-off outside it.
    """
    N = values.shape[0]
    if r == 0:
        return np.array(values, dtype=float)
    _check_radius(r, N)
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return np.full((N, N), lo)
    out = _ball_mean_from_hat(np.fft.rfft2(values), N, r)
    return np.clip(out, lo, hi)


def disk_average(fld: ScalarField, r: float) -> DiskAverageField:
    return DiskAverageField(r, ball_means(fld.samples, r))


def mix_g(fld: ScalarField, params: MixParams | None = None) -> MixGResult:
    """Smallest candidate radius at which every ball average is small.

    A radius qualifies when ``max_x |avg_{B(x,r)} f| <= kappa' * ||f||_inf``.
    The first qualifying radius in the scan is returned; when none qualifies
    the result is the sentinel ``1/2`` flagged ``saturated``.
    """
    params = params or MixParams()
    N = fld.N
    radii = params.radii_for(N)
    if radii.size == 0:
        raise ValueError("empty radii set")
    sup = fld.sup
    if sup == 0.0:
        return MixGResult(0.0, 0.0, False, 0.0)
    level = params.kappa_prime * sup
    fhat = np.fft.rfft2(fld.samples)
    prev = 0.0
    for r in radii:
        _check_radius(float(r), N)
        worst = float(np.max(np.abs(_ball_mean_from_hat(fhat, N, float(r)))))
        if worst <= level:
            return MixGResult(float(r), float(r) - prev, False, worst / sup)
        prev = float(r)
    return MixGResult(0.5, 0.5 - float(radii[-2]) if radii.size > 1 else 0.5, True, worst / sup)


def mix_f(fld: ScalarField) -> float:
    """Functional mixing scale: the homogeneous ``H^-1`` norm."""
    return sobolev_norm(fld, -1.0)
