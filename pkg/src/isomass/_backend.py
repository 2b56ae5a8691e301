"""Select the compiled kernels when available, else the numpy fallback.

``ISOMASS_BACKEND=python`` forces the fallback; ``ISOMASS_BACKEND=cython``
makes a missing extension an import error.
"""

from __future__ import annotations

import os

from . import _kernels_py

_requested = os.environ.get("ISOMASS_BACKEND", "auto").lower()

if _requested == "python":
    kernels = _kernels_py
    NAME = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
        NAME = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        kernels = _kernels_py
        NAME = "python"

BACKENDS = {"python": _kernels_py}
if NAME == "cython":
    BACKENDS["cython"] = kernels
