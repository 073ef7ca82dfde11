"""Kernel backend selection.

The package ships two implementations of its hot inner loops: a compiled
Cython extension and a numpy fallback with identical semantics.  The choice
is made once at import time and can be forced with::

    MMFUSION_BACKEND=pure      # always use the numpy kernels
    MMFUSION_BACKEND=compiled  # require the extension, fail if missing
    MMFUSION_BACKEND=auto      # default: compiled when available

``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from .errors import ConfigError

BACKEND_ENV = "MMFUSION_BACKEND"


def _load():
    choice = os.environ.get(BACKEND_ENV, "auto")
    if choice not in ("auto", "pure", "compiled"):
        raise ConfigError(
            f"{BACKEND_ENV} must be auto, pure or compiled, got {choice!r}"
        )
    if choice != "pure":
        try:
            from . import _ckernels

            return _ckernels, "compiled"
        except ImportError:
            if choice == "compiled":
                raise
    from . import _kernels_numpy

    return _kernels_numpy, "pure"


kernels, BACKEND_NAME = _load()


def backend_name() -> str:
    """Which kernel implementation this process is running on."""
    return BACKEND_NAME
