"""Pick the kernel implementation at import time.

The compiled extension is used when it was built; setting the environment
variable ``ADSLICE_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _kernels_py

_FORCE_PY = os.environ.get("ADSLICE_PURE_PYTHON", "") not in ("", "0")

kernels = _kernels_py
if not _FORCE_PY:
    try:
        from . import _ckernels as kernels  # noqa: F811
    except ImportError:
        kernels = _kernels_py

compiled_available = True
try:
    from . import _ckernels  # noqa: F401
except ImportError:
    compiled_available = False


def backend_name():
    return kernels.NAME


def use_backend(name):
    """Switch kernels at runtime (``"cython"`` or ``"numpy"``); used by tests and benchmarks."""
    global kernels
    if name == "numpy":
        kernels = _kernels_py
    elif name == "cython":
        from . import _ckernels

        kernels = _ckernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    return kernels
