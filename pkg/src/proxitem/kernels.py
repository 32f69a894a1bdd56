"""Kernel backend selection.

The compiled core is used when it was built; otherwise the numpy fallback.
Setting ``PROXITEM_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

G_CODES = {"zero": 0, "l1": 1, "box": 2, "nonneg": 3, "sq_l2": 4}

_backend = _pykernels
if os.environ.get("PROXITEM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _backend  # noqa: F811
    except ImportError:
        pass

BACKEND = _backend.BACKEND
prox = _backend.prox
run_momentum = _backend.run_momentum
run_pg = _backend.run_pg
pg_solve = _backend.pg_solve


def available_backends():
    """Map of backend name to module for every backend importable here."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        return out
    out["cython"] = _ckernels
    return out
