"""
Periodic scalar fields on the unit torus and their spectral norms.

Samples are node-centred: ``samples[i, j]`` is the value at the point
``(x, y) = (i / N, j / N)``.  The first array axis is therefore the
x-direction.  Fourier coefficients use the forward-normalised convention

    f_hat(k) = (1 / N^2) * sum_{i,j} f(i/N, j/N) exp(-2 pi i k . (i/N, j/N))

so that ``f_hat(0)`` is the mean and Parseval reads
``mean(|f|^2) = sum_k |f_hat(k)|^2``.  Wave-vector magnitudes ``|k|`` are the
Euclidean norms of the integer vectors (no factor of 2 pi).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ZERO_MEAN_RTOL = 1e-12


class FieldError(ValueError):
    """Raised for malformed fields or invalid norm requests."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class ScalarField:
    """
    Real samples of a scalar on an ``N x N`` periodic grid.

    Parameters
    ----------
    samples : ndarray, shape (N, N)
        Node values, read-only after construction.
    mean : float
        Cached arithmetic mean of ``samples``.
    zero_mean : bool
        True when the field was gauged to zero average.
    """

    samples: np.ndarray
    mean: float
    zero_mean: bool = False

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def has_zero_mean(self) -> bool:
        return abs(self.mean) <= ZERO_MEAN_RTOL * max(1.0, self.sup)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.samples, dtype=dtype)


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a real field, stored in numpy FFT order."""

    coefficients: np.ndarray
    _kk: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_kk", wavenumber_squared(self.N))

    @property
    def N(self) -> int:
        return self.coefficients.shape[0]

    def coefficient(self, k1: int, k2: int) -> complex:
        """Coefficient of the mode ``exp(2 pi i (k1 x + k2 y))``."""
        return complex(self.coefficients[k1 % self.N, k2 % self.N])

    @property
    def wavenumber_squared(self) -> np.ndarray:
        return self._kk


def wavenumbers(N: int) -> np.ndarray:
    """Integer wavenumbers in FFT order, ``{-N/2, ..., N/2 - 1}``."""
    return np.fft.fftfreq(N, d=1.0 / N)


def wavenumber_squared(N: int) -> np.ndarray:
    k = wavenumbers(N)
    return k[:, None] ** 2 + k[None, :] ** 2


def make_field(samples, enforce_zero_mean: bool = False) -> ScalarField:
    """Validate samples and build a :class:`ScalarField`.

    With ``enforce_zero_mean`` the mean is subtracted first.
    """
    arr = np.array(samples, dtype=np.float64, copy=True)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise FieldError(f"samples must be square, got shape {arr.shape}")
    N = arr.shape[0]
    if not _is_power_of_two(N) or N < 8:
        raise FieldError(f"resolution must be a power of two >= 8, got {N}")
    if not np.all(np.isfinite(arr)):
        raise FieldError("samples contain non-finite values")
    mean = float(np.mean(arr))
    if enforce_zero_mean:
        arr -= mean
        mean = float(np.mean(arr))
    arr.setflags(write=False)
    fld = ScalarField(arr, mean, False)
    if enforce_zero_mean or fld.has_zero_mean():
        fld = ScalarField(arr, mean, True)
    return fld


def spectral(fld: ScalarField) -> SpectralField:
    N = fld.N
    return SpectralField(np.fft.fft2(fld.samples) / (N * N))


def inverse(spec: SpectralField) -> ScalarField:
    N = spec.N
    return make_field(np.real(np.fft.ifft2(spec.coefficients * (N * N))))


def _require_zero_mean(fld: ScalarField, what: str) -> None:
    if not fld.has_zero_mean():
        raise FieldError(f"{what} requires a zero-mean field (mean = {fld.mean:.3e})")


def sobolev_norm(fld: ScalarField, s: float) -> float:
    """Homogeneous Sobolev norm of order ``s``.

    Sums ``|k|^(2s) |f_hat(k)|^2`` over all ``k != 0`` on the FFT grid,
    Nyquist row and column included.  Negative orders need a zero-mean field.
    """
    if s < 0:
        _require_zero_mean(fld, f"sobolev_norm with s={s}")
    coeff = spectral(fld).coefficients
    kk = wavenumber_squared(fld.N)
    power = np.abs(coeff) ** 2
    power[0, 0] = 0.0
    kk[0, 0] = 1.0
    weights = kk**s
    return float(np.sqrt(np.sum(weights * power)))


def lp_norm(fld: ScalarField, p: float) -> float:
    """Discrete ``L^p`` quadrature, ``p = inf`` gives the max modulus."""
    if p < 1:
        raise FieldError(f"p must be >= 1, got {p}")
    a = np.abs(fld.samples)
    if np.isinf(p):
        return float(np.max(a))
    if p == 1:
        return float(np.mean(a))
    if p == 2:
        return float(np.sqrt(np.mean(a * a)))
    return float(np.mean(a**p) ** (1.0 / p))


def rescale(fld: ScalarField, m: int) -> ScalarField:
    """Return ``x -> f(m x)``: the torus copy of ``f`` shrunk by ``1/m``."""
    N = fld.N
    if m < 1 or N % m != 0:
        raise FieldError(f"rescale factor {m} must be a positive divisor of N={N}")
    idx = (np.arange(N) * m) % N
    return make_field(fld.samples[np.ix_(idx, idx)])


def poisson_potential(fld: ScalarField) -> ScalarField:
    """Zero-average solution ``phi`` of ``Laplace(phi) = f``.

    The Laplacian symbol is ``-4 pi^2 |k|^2``.  Consequently the physical
    gradient satisfies ``||grad phi||_L2 = sobolev_norm(f, -1) / (2 pi)``:
    the mixing norm is measured in integer wavenumbers, the gradient in
    physical ones.
    """
    _require_zero_mean(fld, "poisson_potential")
    coeff = spectral(fld).coefficients
    kk = wavenumber_squared(fld.N)
    kk[0, 0] = 1.0
    phi_hat = -coeff / (4.0 * np.pi**2 * kk)
    phi_hat[0, 0] = 0.0
    return inverse(SpectralField(phi_hat))


def spectral_laplacian(fld: ScalarField) -> ScalarField:
    coeff = spectral(fld).coefficients
    kk = wavenumber_squared(fld.N)
    return inverse(SpectralField(-4.0 * np.pi**2 * kk * coeff))


def spectral_gradient(fld: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Physical gradient ``(d/dx, d/dy)`` by spectral differentiation.

    The Nyquist mode is dropped, as usual for odd derivatives.
    """
    N = fld.N
    k = wavenumbers(N)
    k[N // 2] = 0.0
    coeff = np.fft.fft2(fld.samples)
    gx = np.real(np.fft.ifft2(2j * np.pi * k[:, None] * coeff))
    gy = np.real(np.fft.ifft2(2j * np.pi * k[None, :] * coeff))
    return gx, gy


def node_coordinates(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Meshgrid of node positions, indexed ``[i, j] -> (i/N, j/N)``."""
    c = np.arange(N) / N
    return np.meshgrid(c, c, indexing="ij")


def trig_field(N: int, modes, zero_mean: bool = True) -> ScalarField:
    """Sample a real trigonometric polynomial.

    ``modes`` is an iterable of ``(amplitude, k1, k2, phase)`` terms, each
    contributing ``amplitude * cos(2 pi (k1 x + k2 y) + phase)``.
    """
    X, Y = node_coordinates(N)
    out = np.zeros((N, N))
    for amp, k1, k2, phase in modes:
        out += amp * np.cos(2.0 * np.pi * (k1 * X + k2 * Y) + phase)
    return make_field(out, enforce_zero_mean=zero_mean)


def synthesize(coeffs: np.ndarray, N: int) -> ScalarField:
    """Real field with centred coefficient block ``coeffs`` sampled at ``N``.

    ``coeffs`` has shape ``(2K+1, 2K+1)`` with entry ``[K + k1, K + k2]``.
    The real part is taken, i.e. the coefficients are Hermitian-symmetrised.
    The continuum function does not depend on ``N``, so this is the tool for
    refinement studies.
    """
    K = coeffs.shape[0] // 2
    if 2 * K >= N // 2:
        raise FieldError(f"band limit {K} too large for N={N}")
    full = np.zeros((N, N), dtype=complex)
    ks = np.arange(-K, K + 1) % N
    full[np.ix_(ks, ks)] = coeffs
    return make_field(np.real(np.fft.ifft2(full)) * N * N, enforce_zero_mean=False)


def random_coefficients(kmax: int, rng: np.random.Generator, zero_mean: bool = True) -> np.ndarray:
    c = rng.standard_normal((2 * kmax + 1, 2 * kmax + 1)) + 1j * rng.standard_normal(
        (2 * kmax + 1, 2 * kmax + 1)
    )
    if zero_mean:
        c[kmax, kmax] = 0.0
    return c


def random_band_limited(N: int, rng: np.random.Generator, kmax: int | None = None) -> ScalarField:
    """Random zero-mean field with modes ``|k_i| <= kmax < N/4``."""
    if kmax is None:
        kmax = max(1, N // 8)
    fld = synthesize(random_coefficients(kmax, rng), N)
    return make_field(fld.samples, enforce_zero_mean=True)


# -- serialisation -----------------------------------------------------------

_INT = np.dtype("<i8")
_FLOAT = np.dtype("<f8")


def field_to_bytes(fld: ScalarField) -> bytes:
    return np.array([fld.N], dtype=_INT).tobytes() + np.ascontiguousarray(
        fld.samples, dtype=_FLOAT
    ).tobytes()


def _read_records(data: bytes) -> list[np.ndarray]:
    out = []
    pos = 0
    while pos < len(data):
        if pos + 8 > len(data):
            raise FieldError("truncated field header")
        N = int(np.frombuffer(data, dtype=_INT, count=1, offset=pos)[0])
        pos += 8
        nbytes = N * N * 8
        if N <= 0 or pos + nbytes > len(data):
            raise FieldError(f"truncated field payload for N={N}")
        out.append(np.frombuffer(data, dtype=_FLOAT, count=N * N, offset=pos).reshape(N, N).copy())
        pos += nbytes
    return out


def write_binary(path, *fields: ScalarField) -> None:
    """Write one or more fields back to back (``int64 N`` then ``N^2`` doubles, little-endian)."""
    Path(path).write_bytes(b"".join(field_to_bytes(f) for f in fields))


def read_binary(path) -> list[ScalarField]:
    return [make_field(a) for a in _read_records(Path(path).read_bytes())]


def write_csv(path, fld: ScalarField) -> None:
    np.savetxt(path, fld.samples, delimiter=",", fmt="%.17g")


def read_csv(path) -> ScalarField:
    return make_field(np.loadtxt(path, delimiter=",", ndmin=2))
