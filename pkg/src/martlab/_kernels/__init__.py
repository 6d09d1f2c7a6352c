"""Hot-kernel backend selection.

The compiled Cython core is preferred when importable; the numpy fallback is
always available.  Force a backend with MARTLAB_KERNELS=cython|numpy.
"""

import os

from martlab._kernels import fallback

_requested = os.environ.get("MARTLAB_KERNELS", "auto").lower()

if _requested in ("auto", ""):
    try:
        from martlab._kernels import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = fallback
        BACKEND = "numpy"
elif _requested == "cython":
    from martlab._kernels import _core as _impl
    BACKEND = "cython"
elif _requested in ("numpy", "fallback", "python"):
    _impl = fallback
    BACKEND = "numpy"
else:
    raise ValueError(f"unrecognized MARTLAB_KERNELS value: {_requested!r}")

projection_chunk = _impl.projection_chunk
weighted_z_stats = _impl.weighted_z_stats

A_CONST = fallback.A_CONST
A_PROFILE = fallback.A_PROFILE
A_ROTATION = fallback.A_ROTATION

__all__ = ["BACKEND", "projection_chunk", "weighted_z_stats",
           "A_CONST", "A_PROFILE", "A_ROTATION", "fallback"]
