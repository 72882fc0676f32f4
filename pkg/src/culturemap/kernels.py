"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when
``CULTUREMAP_PURE_PYTHON=1`` is set, the pure-Python twins are used.  Both
produce identical results, so the choice only affects speed.
"""

import os

from . import _pykernels

if os.environ.get("CULTUREMAP_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _pykernels

gibbs_sweep = _impl.gibbs_sweep
optics_order = _impl.optics_order


def backends():
    """Map of available backend name -> kernel module (for benchmarks and tests)."""
    out = {"python": _pykernels}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
