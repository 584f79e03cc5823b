"""Kernel backend selection.

The compiled Cython kernel is preferred when it imported cleanly; the numpy
implementation is the fallback. Both are bit-identical (see _kernels_np), so
the choice only affects speed. Override with HIPOSE_BACKEND=numpy or
HIPOSE_BACKEND=compiled.
"""

from __future__ import annotations

import os

from . import _kernels_np

_requested = os.environ.get("HIPOSE_BACKEND", "auto").strip().lower() or "auto"
if _requested not in ("auto", "compiled", "numpy"):
    raise RuntimeError(
        f"HIPOSE_BACKEND must be 'auto', 'compiled', or 'numpy', got {_requested!r}"
    )

_compiled = None
if _requested in ("auto", "compiled"):
    try:
        from . import _kernels as _compiled  # type: ignore[no-redef]
    except ImportError:
        if _requested == "compiled":
            raise RuntimeError(
                "HIPOSE_BACKEND=compiled but the extension is not built; "
                "reinstall with a C toolchain or unset HIPOSE_BACKEND"
            ) from None

if _compiled is not None:
    BACKEND = "compiled"
    min_dist_uniform = _compiled.min_dist_uniform
else:
    BACKEND = "numpy"
    min_dist_uniform = _kernels_np.min_dist_uniform


def available_backends() -> list[str]:
    return ["compiled", "numpy"] if _compiled is not None else ["numpy"]
