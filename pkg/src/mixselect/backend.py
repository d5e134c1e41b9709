"""Select the Gram-kernel implementation at import time.

The compiled extension is used when it was built; setting the environment
variable ``MIXSELECT_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

NAME = "python"

if os.environ.get("MIXSELECT_PURE_PYTHON", "") not in ("", "0"):
    from ._kernels_py import ard_cross, ard_gram
else:
    try:
        from ._kernels_ext import ard_cross, ard_gram

        NAME = "cython"
    except ImportError:  # extension not built
        from ._kernels_py import ard_cross, ard_gram

__all__ = ["NAME", "ard_gram", "ard_cross"]
