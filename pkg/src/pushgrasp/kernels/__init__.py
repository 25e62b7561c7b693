"""Hot kernels: compiled extension when available, numpy fallback otherwise.

Set ``PUSHGRASP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("PUSHGRASP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None and _active is compiled_backend else "python"

raster_polygon = _active.raster_polygon
raster_disc = _active.raster_disc
rotate_bilinear = _active.rotate_bilinear

__all__ = ["BACKEND", "raster_polygon", "raster_disc", "rotate_bilinear",
           "python_backend", "compiled_backend"]
