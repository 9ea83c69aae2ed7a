"""Kinematics kernels with backend selection at import time.

The compiled extension (``_native``, Cython) is preferred; the NumPy
implementation (``_pure``) is the fallback and the reference. Set
``RECONCELL_PURE=1`` before import to force the fallback. Both backends
expose the same four kernels; ``BACKEND`` names the active one.
"""

from __future__ import annotations

import os

from . import _pure

if os.environ.get("RECONCELL_PURE") == "1":
    _backend = _pure
    BACKEND = "pure"
else:
    try:
        from . import _native as _backend  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        _backend = _pure
        BACKEND = "pure"

fk = _backend.fk
jacobian = _backend.jacobian
dls_qdot = _backend.dls_qdot
ik_solve = _backend.ik_solve

# pure helpers used by oracles and pose conversion regardless of backend
dh_transform = _pure.dh_transform
pose_error = _pure.pose_error


def available_backends() -> dict:
    """Name -> module for every importable backend (benchmark/cross-check)."""
    out = {"pure": _pure}
    try:
        from . import _native

        out["native"] = _native
    except ImportError:
        pass
    return out
