"""Backend selection for the modular arithmetic kernels.

The compiled extension is used when it was built; otherwise the pure-Python
versions are used. Set ``DECWF_PURE_PYTHON=1`` to force the fallback.
"""

import os

from decwf import _kernels_py

BACKEND = "python"

if os.environ.get("DECWF_PURE_PYTHON", "") in ("", "0"):
    try:
        from decwf import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

powmod = _impl.powmod
multi_powmod = _impl.multi_powmod
poly_eval = _impl.poly_eval
commit_eval = _impl.commit_eval
lagrange_at_zero = _impl.lagrange_at_zero

__all__ = [
    "BACKEND",
    "powmod",
    "multi_powmod",
    "poly_eval",
    "commit_eval",
    "lagrange_at_zero",
]
