"""Select the compiled kernels when available, else the pure-Python ones.

Set ``PVTEST_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
if not os.environ.get("PVTEST_PURE_PYTHON"):
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _fallback
else:  # pragma: no cover
    _impl = _fallback

clip_power_cells = _impl.clip_power_cells
persistence_pairs_2d = _impl.persistence_pairs_2d


def backends():
    """Return ``{name: module}`` for every importable kernel backend."""
    out = {"python": _fallback}
    try:
        from . import _core

        out["cython"] = _core
    except ImportError:  # pragma: no cover
        pass
    return out
