"""Hot mesh kernels with a compiled backend and a pure-Python fallback.

The compiled extension ``warplab._ckernels`` is used when it imports; setting
``WARPLAB_PURE_PYTHON=1`` forces the fallback.  Both backends produce
identical outputs in identical order.
"""
from __future__ import annotations

import os

from . import _kernels_py

python_backend = _kernels_py
compiled_backend = None
if not os.environ.get("WARPLAB_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend or python_backend
BACKEND = _active.BACKEND
clip_level = _active.clip_level
complement_counts = _active.complement_counts

__all__ = ["BACKEND", "clip_level", "complement_counts", "python_backend", "compiled_backend"]
