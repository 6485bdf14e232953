"""Backend selection for the per-sample hot loops.

The compiled extension ``deqflow._kernels`` is used when it imports; otherwise
the pure-Python twin ``deqflow._kernels_py``. Set ``DEQFLOW_PURE_PYTHON=1`` to
force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("DEQFLOW_PURE_PYTHON"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

backend = _compiled if _compiled is not None else _kernels_py
BACKEND_NAME = "compiled" if _compiled is not None else "python"

PICARD = 0
BRENT = 1


def get_backend(name=None):
    """Return a kernel module: ``"compiled"``, ``"python"``, or the active one for ``None``."""
    if name is None:
        return backend
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def compiled_available() -> bool:
    return _compiled is not None
