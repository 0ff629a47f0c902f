"""Kernel backend selection.

The compiled extension is preferred; the numpy reference implementation is
the fallback. Set ``STABGAME_BACKEND=python`` (or ``compiled``) to force one.
"""

from __future__ import annotations

import os

_forced = os.environ.get("STABGAME_BACKEND", "").lower()

if _forced in ("py", "python"):
    from . import _bitcore_py as kernels
elif _forced in ("c", "compiled"):
    from . import _bitcore as kernels  # type: ignore[no-redef]
elif _forced:
    raise ImportError(f"unknown STABGAME_BACKEND value: {_forced!r}")
else:
    try:
        from . import _bitcore as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _bitcore_py as kernels  # type: ignore[no-redef]

BACKEND: str = kernels.BACKEND_NAME
