"""Kernel dispatch: compiled core when importable, numpy fallback otherwise.

Set ``TFLM_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
tendency = _kernels_py.tendency

if os.environ.get("TFLM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core
    except ImportError:
        pass
    else:
        tendency = _core.tendency
        BACKEND = "cython"
