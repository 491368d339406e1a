"""Kernel selection: the compiled extension if importable, else the numpy fallback.

Set ``PLEAK_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("PLEAK_PURE_PYTHON") == "1":
    from pleak._kernels_py import sigmoid, smooth_reduce

    BACKEND = "python"
else:
    try:
        from pleak._kernels import sigmoid, smooth_reduce

        BACKEND = "compiled"
    except ImportError:
        from pleak._kernels_py import sigmoid, smooth_reduce

        BACKEND = "python"

__all__ = ["BACKEND", "sigmoid", "smooth_reduce"]
