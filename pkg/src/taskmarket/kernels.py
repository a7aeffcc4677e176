"""Backend selection for the hot kernels.

The compiled extension is used when it imports cleanly; otherwise, or when
``TASKMARKET_PURE_PYTHON=1`` is set, the pure-Python twin is used. Both
expose ``cost_gap``, ``bisect_cost_gap`` and ``demean_alternating``.
"""

import os

from . import _pykernels

python_backend = _pykernels

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and os.environ.get("TASKMARKET_PURE_PYTHON", "") not in ("1", "true"):
    backend = compiled_backend
    BACKEND_NAME = "compiled"
else:
    backend = python_backend
    BACKEND_NAME = "python"

cost_gap = backend.cost_gap
bisect_cost_gap = backend.bisect_cost_gap
demean_alternating = backend.demean_alternating
