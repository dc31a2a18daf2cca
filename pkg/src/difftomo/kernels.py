"""Kernel backend selection.

The compiled extension is used when it imports; setting
``DIFFTOMO_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _kernels_py

if os.environ.get("DIFFTOMO_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

bjorck_pereyra = _impl.bjorck_pereyra
dirichlet_line_sums = _impl.dirichlet_line_sums


def backends():
    """Mapping of every importable backend name to its module."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
