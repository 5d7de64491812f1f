from __future__ import annotations

import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixlab import _kernels
from mixlab._kernels import _pykernels
from mixlab.estimates import _offsets, g_radii
from mixlab.transport import flow_map
from mixlab.velocity import alternating_shear

compiled = pytest.mark.skipif(
    "cython" not in _kernels.available_backends(), reason="compiled kernels not built"
)


@pytest.fixture
def restore_backend():
    prev = _kernels.BACKEND
    yield
    _kernels.use_backend(prev)


def test_backend_names(restore_backend):
    assert _kernels.BACKEND in _kernels.available_backends()
    _kernels.use_backend("python")
    assert _kernels.BACKEND == "python"
    with pytest.raises(ValueError):
        _kernels.use_backend("fortran")


@pytest.mark.parametrize("N", [8, 32])
def test_bicubic_reproduces_nodes(N):
    rng = np.random.default_rng(N)
    s = rng.standard_normal((N, N))
    X, Y = np.meshgrid(np.arange(N) / N, np.arange(N) / N, indexing="ij")
    np.testing.assert_allclose(_pykernels.bicubic_periodic(s, X, Y), s, atol=1e-14)


def test_bicubic_reproduces_quadratics():
    # Keys cubic convolution is exact on quadratics away from the wrap seam
    N = 64
    i = np.arange(N, dtype=float)
    s = np.add.outer(i**2, 3 * i)
    x = np.array([10.3, 20.75, 30.5]) / N
    y = np.array([11.1, 40.2, 5.9]) / N
    got = _pykernels.bicubic_periodic(s, x, y)
    np.testing.assert_allclose(got, (x * N) ** 2 + 3 * (y * N), rtol=1e-12)


@compiled
@given(seed=st.integers(0, 10_000), N=st.sampled_from([8, 16, 64]))
def test_bicubic_backends_agree(seed, N):
    from mixlab._kernels import _ckernels

    rng = np.random.default_rng(seed)
    s = rng.standard_normal((N, N))
    x = rng.uniform(-2, 3, size=(N, N))
    y = rng.uniform(-2, 3, size=(N, N))
    a = _pykernels.bicubic_periodic(s, x, y)
    b = _ckernels.bicubic_periodic(s, x, y)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@compiled
@pytest.mark.parametrize("N", [16, 32])
def test_log_kernel_backends_agree(N):
    from mixlab._kernels import _ckernels

    fl = flow_map(alternating_shear(1.0, 0.5), 0.0, 0.8, 0.01, N)
    radii = g_radii(N)
    a, b, jmin, counts = _offsets(N, tuple(float(r) for r in radii))
    px, py = (np.ascontiguousarray(v) for v in fl.torus_positions())
    ref = _pykernels.log_ball_averages(px, py, a, b, jmin, radii, counts)
    got = _ckernels.log_ball_averages(px, py, a, b, jmin, radii, counts)
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-14)


def test_fallback_selected_without_extension():
    code = (
        "import sys; sys.modules['mixlab._kernels._ckernels'] = None\n"
        "from mixlab import _kernels\n"
        "from mixlab.estimates import g_functional, identity_flow\n"
        "assert _kernels.BACKEND == 'python', _kernels.BACKEND\n"
        "assert _kernels.available_backends() == ['python']\n"
        "print(g_functional(identity_flow(16)).value)\n"
    )
    r = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert float(r.stdout) < np.log(2.0)
