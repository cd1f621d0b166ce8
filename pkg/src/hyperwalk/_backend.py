"""Select the compiled kernels when available, else the pure-Python fallback.

Set ``HYPERWALK_PURE_PYTHON=1`` to force the fallback.
"""

import os

KERNEL_BACKEND = "python"

if os.environ.get("HYPERWALK_PURE_PYTHON", "") not in ("", "0"):
    from hyperwalk._fallback import dopri5, master_rhs
else:
    try:
        from hyperwalk._kernels import dopri5, master_rhs

        KERNEL_BACKEND = "cython"
    except ImportError:
        from hyperwalk._fallback import dopri5, master_rhs

__all__ = ["KERNEL_BACKEND", "dopri5", "master_rhs"]
