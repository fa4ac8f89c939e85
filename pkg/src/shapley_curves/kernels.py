"""Backend selection for the local linear kernels.

The compiled extension ``_core`` is used when it imports; otherwise the NumPy
implementation in ``_core_py`` is used. Set ``SHAPLEY_CURVES_BACKEND=python``
to force the fallback (the benchmark and the backend-agreement tests do so
explicitly via :func:`get_backend`).
"""
import os

from . import _core_py

try:
    from . import _core as _core_c
except ImportError:  # extension not built
    _core_c = None

_BACKENDS = {"python": _core_py}
if _core_c is not None:
    _BACKENDS["cython"] = _core_c


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Return the kernel module for ``name`` (``"cython"`` or ``"python"``)."""
    if name is None:
        name = BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}") from None


_requested = os.environ.get("SHAPLEY_CURVES_BACKEND", "").strip().lower()
if _requested in _BACKENDS:
    BACKEND = _requested
else:
    BACKEND = "cython" if _core_c is not None else "python"

_active = _BACKENDS[BACKEND]
loclin_eval = _active.loclin_eval
loclin_weights = _active.loclin_weights
loo_predict = _active.loo_predict
