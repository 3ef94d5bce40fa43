"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy implementation in ``_kernels_py`` is used. Setting the environment
variable ``YAMABE_LAB_KERNELS=python`` forces the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("YAMABE_LAB_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

laplacian_apply = _impl.laplacian_apply
curvature = _impl.curvature
rk4_step = _impl.rk4_step

__all__ = ["BACKEND", "laplacian_apply", "curvature", "rk4_step"]
