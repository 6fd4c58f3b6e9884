"""Hot kernels of the depth step, compiled when available.

Set ``PHOTOSR_PURE_PYTHON=1`` to force the numpy implementation.
"""

import os

from . import _kernels_py

if os.environ.get("PHOTOSR_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels_c as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

apply_normal = _impl.apply_normal
normal_rhs = _impl.normal_rhs
residual_sq = _impl.residual_sq
jacobi_diag = _impl.jacobi_diag
