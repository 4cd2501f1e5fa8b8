"""Geometry kernel selection.

The compiled extension is used when it was built; otherwise the pure-Python
reference is used. Setting ``HRNAV_PURE_PYTHON=1`` forces the fallback, which
the test-suite uses to check both paths agree.
"""

import os

from . import _kernels_py

BACKEND = "python"

if os.environ.get("HRNAV_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

raycast = _impl.raycast
surface_distance = _impl.surface_distance
adam_update = _impl.adam_update
soft_update = _impl.soft_update
beam_angles = _kernels_py.beam_angles
RANGE_FLOOR = _kernels_py.RANGE_FLOOR

__all__ = ["BACKEND", "raycast", "surface_distance", "adam_update", "soft_update", "beam_angles", "RANGE_FLOOR"]
