"""Hot inner loops with a compiled core and a pure NumPy fallback.

The compiled extension ``_ckernels`` is used when it was built; otherwise the
NumPy versions in ``_pykernels`` take over transparently.  ``BACKEND`` names
the active implementation and :func:`use_backend` switches it at run time.
"""

from __future__ import annotations

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKEND = "cython" if _ckernels is not None else "python"

_impl = _ckernels if _ckernels is not None else _pykernels


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _ckernels is not None else [])


def use_backend(name: str) -> None:
    global _impl, BACKEND
    if name == "cython":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available in this build")
        _impl = _ckernels
    elif name == "python":
        _impl = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name


def bicubic_periodic(samples, x, y):
    return _impl.bicubic_periodic(samples, x, y)


def log_ball_averages(px, py, off_a, off_b, jmin, radii, counts):
    return _impl.log_ball_averages(px, py, off_a, off_b, jmin, radii, counts)
