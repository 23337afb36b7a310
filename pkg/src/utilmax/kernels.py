"""Hot path-sample kernels with backend selection at import.

The compiled extension ``utilmax._ckernels`` is used when it was built;
otherwise (or with ``UTILMAX_PURE_PYTHON=1``) the numpy versions in
``utilmax._pykernels`` are used.  ``BACKEND`` names the active one.
"""
import os

import numpy as np

from . import _pykernels
from ._pykernels import COSH, EXPABS, INDICATOR, POWER

_impl = _pykernels
BACKEND = "python"
if not os.environ.get("UTILMAX_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

__all__ = ["BACKEND", "POWER", "COSH", "EXPABS", "INDICATOR",
           "maximal_paths", "integral_maximal", "young_mean", "backends"]


def backends():
    """Available kernel modules keyed by name (for tests and benchmarks)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


def maximal_paths(paths):
    return _impl.maximal_paths(np.ascontiguousarray(paths, dtype=np.float64))


def integral_maximal(increments, weights):
    return _impl.integral_maximal(np.ascontiguousarray(increments, dtype=np.float64),
                                  np.ascontiguousarray(weights, dtype=np.float64))


def young_mean(code, param, values, weights, scale):
    return float(_impl.young_mean(int(code), float(param),
                                  np.ascontiguousarray(values, dtype=np.float64),
                                  np.ascontiguousarray(weights, dtype=np.float64),
                                  float(scale)))
