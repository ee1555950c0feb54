"""Backend selection for the hot compute kernels.

Two interchangeable implementations exist: a Cython extension
(``sketchdeform.kernels._fast``) and a pure-numpy fallback
(``sketchdeform.kernels.pure``). The environment variable
``SKETCHDEFORM_BACKEND`` picks one explicitly:

    SKETCHDEFORM_BACKEND=fast   require the compiled extension
    SKETCHDEFORM_BACKEND=pure   force the numpy fallback

Unset, the compiled extension is used when importable, else the fallback.
``BACKEND`` records which one won.
"""

from __future__ import annotations

import os

from . import pure

_requested = os.environ.get("SKETCHDEFORM_BACKEND", "").strip().lower()

if _requested not in ("", "fast", "pure"):
    raise ImportError(
        f"SKETCHDEFORM_BACKEND={_requested!r} not recognized; use 'fast' or 'pure'"
    )

if _requested == "pure":
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _fast as _impl  # type: ignore[attr-defined]

        BACKEND = "fast"
    except ImportError:
        if _requested == "fast":
            raise ImportError(
                "SKETCHDEFORM_BACKEND=fast but the compiled extension is not "
                "available; rebuild the package or unset the variable"
            ) from None
        _impl = pure
        BACKEND = "pure"

snake_evolve = _impl.snake_evolve
rasterize_triangles = _impl.rasterize_triangles

__all__ = ["BACKEND", "snake_evolve", "rasterize_triangles", "pure"]
