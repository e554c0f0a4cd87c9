"""Backend selection for the elementwise kernels.

The compiled Cython core is used when it imports; otherwise (or when
``NLSFLUX_PURE=1`` is set) the numpy implementations are used.  Callers
always go through this module's attributes, so :func:`use_backend` takes
effect immediately.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

_NAMES = ("cubic", "scatter", "weighted_norm2", "weighted_im_inner",
          "weighted_re_inner", "axpy")

BACKEND = None


def available_backends():
    names = ["numpy"]
    if _kernels_c is not None:
        names.insert(0, "cython")
    return names


def use_backend(name):
    """Switch to ``"cython"`` or ``"numpy"``; returns the previous backend name."""
    global BACKEND
    if name == "cython":
        if _kernels_c is None:
            raise RuntimeError("compiled kernels are not built; reinstall without NLSFLUX_NO_EXT")
        src = _kernels_c
    elif name == "numpy":
        src = _kernels_py
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    previous = BACKEND
    g = globals()
    for fn in _NAMES:
        g[fn] = getattr(src, fn)
    BACKEND = name
    return previous


use_backend("numpy" if (_kernels_c is None or os.environ.get("NLSFLUX_PURE")) else "cython")
