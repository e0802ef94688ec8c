"""Backend selection for the exact nearest-neighbor kernel.

The compiled Cython kernel is preferred; the numpy implementation is the
drop-in fallback when the extension was not built. Set FPT_PURE_PYTHON=1 to
force the fallback (the two are bitwise-equal; see benchmarks/).
"""

import os

import numpy as np

from . import _nn_python

try:
    from . import _nnkernel
except ImportError:
    _nnkernel = None

if os.environ.get("FPT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _nn_python
    BACKEND = "python"
elif _nnkernel is not None:
    _impl = _nnkernel
    BACKEND = "compiled"
else:
    _impl = _nn_python
    BACKEND = "python"


def available_backends() -> dict:
    """name -> nn_indices callable, for the kernel benchmark and tests."""
    out = {"python": _nn_python.nn_indices}
    if _nnkernel is not None:
        out["compiled"] = _nnkernel.nn_indices
    return out


def _coerce(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"expected an [N, 3] point array, got shape {a.shape}")
    return a


def nn_indices(query: np.ndarray, target: np.ndarray):
    """Exact nearest target index and squared distance for every query point."""
    query = _coerce(query)
    target = _coerce(target)
    if target.shape[0] == 0:
        raise ValueError("nn_indices: empty target point set")
    if query.shape[0] == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    return _impl.nn_indices(query, target)
