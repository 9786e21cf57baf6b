"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``ALELAB_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
compose = _kernels_py.compose

if os.environ.get("ALELAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        compose = _compiled.compose
        BACKEND = "cython"

__all__ = ["BACKEND", "compose"]
