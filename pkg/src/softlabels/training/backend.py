"""Selects the training-kernel backend at import time.

The compiled extension is used when it imported cleanly; otherwise the
NumPy implementation takes over. SOFTLABELS_KERNELS=python forces the
fallback, SOFTLABELS_KERNELS=c insists on the extension.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels  # compiled extension, absent in pure installs
except ImportError:
    _kernels = None

_choice = os.environ.get("SOFTLABELS_KERNELS", "").strip().lower()
if _choice in ("python", "py"):
    kernels = _kernels_py
elif _choice in ("c", "cython", "compiled"):
    if _kernels is None:
        raise ImportError(
            "SOFTLABELS_KERNELS=c but the compiled kernel extension is not built"
        )
    kernels = _kernels
elif _choice:
    raise ValueError(f"unrecognized SOFTLABELS_KERNELS value: {_choice!r}")
else:
    kernels = _kernels if _kernels is not None else _kernels_py


def backend_name() -> str:
    """'c' when the compiled kernels are active, 'python' otherwise."""
    return kernels.BACKEND_NAME


def available_backends() -> dict[str, object]:
    """All importable kernel modules, keyed by backend name."""
    out = {_kernels_py.BACKEND_NAME: _kernels_py}
    if _kernels is not None:
        out[_kernels.BACKEND_NAME] = _kernels
    return out
