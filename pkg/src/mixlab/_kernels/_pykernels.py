"""NumPy implementations of the hot kernels (reference and fallback)."""

from __future__ import annotations

import numpy as np

KEYS_A = -0.5


def _keys_weights(f: np.ndarray) -> tuple[np.ndarray, ...]:
    a = KEYS_A
    t0 = 1.0 + f
    t1 = f
    t2 = 1.0 - f
    t3 = 2.0 - f
    w0 = a * t0**3 - 5 * a * t0**2 + 8 * a * t0 - 4 * a
    w1 = (a + 2) * t1**3 - (a + 3) * t1**2 + 1
    w2 = (a + 2) * t2**3 - (a + 3) * t2**2 + 1
    w3 = a * t3**3 - 5 * a * t3**2 + 8 * a * t3 - 4 * a
    return w0, w1, w2, w3


def bicubic_periodic(samples: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Keys cubic-convolution interpolation of periodic node samples at torus points."""
    N = samples.shape[0]
    u = np.asarray(x, dtype=float) * N
    v = np.asarray(y, dtype=float) * N
    iu = np.floor(u)
    iv = np.floor(v)
    fu = u - iu
    fv = v - iv
    iu = iu.astype(np.int64) % N
    iv = iv.astype(np.int64) % N
    wu = _keys_weights(fu)
    wv = _keys_weights(fv)
    out = np.zeros(u.shape)
    for p in range(4):
        ip = (iu + (p - 1)) % N
        row = np.zeros(u.shape)
        for q in range(4):
            row += wv[q] * samples[ip, (iv + (q - 1)) % N]
        out += wu[p] * row
    return out


def log_ball_averages(
    px: np.ndarray,
    py: np.ndarray,
    off_a: np.ndarray,
    off_b: np.ndarray,
    jmin: np.ndarray,
    radii: np.ndarray,
    counts: np.ndarray,
) -> np.ndarray:
    """Ball means of ``log(1 + dist_T(P(x), P(y)) / r)`` for every node and radius.

    ``px, py`` are torus positions of the mapped nodes; offsets are sorted by
    length and offset ``o`` belongs to every ball with index ``>= jmin[o]``.
    """
    N = px.shape[0]
    R = radii.shape[0]
    acc = np.zeros((R, N, N))
    inv_r = (1.0 / radii)[:, None, None]
    for o in range(off_a.shape[0]):
        sx = np.roll(px, (-int(off_a[o]), -int(off_b[o])), axis=(0, 1))
        sy = np.roll(py, (-int(off_a[o]), -int(off_b[o])), axis=(0, 1))
        dx = sx - px
        dx -= np.round(dx)
        dy = sy - py
        dy -= np.round(dy)
        d = np.sqrt(dx * dx + dy * dy)
        j = int(jmin[o])
        acc[j:] += np.log1p(d[None, :, :] * inv_r[j:])
    return acc / counts[:, None, None].astype(float)
