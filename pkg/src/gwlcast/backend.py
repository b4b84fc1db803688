"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy implementation in ``_pykernels`` is used.  Set ``GWLCAST_PURE_PYTHON=1``
to force the fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("GWLCAST_PURE_PYTHON") == "1":
    _impl = _pykernels
    NAME = "python"
else:
    try:
        from . import _ckernels as _impl
        NAME = "compiled"
    except ImportError:
        _impl = _pykernels
        NAME = "python"

forward = _impl.forward
backward = _impl.backward


def get(name: str):
    """Return the kernel module called ``name`` ("compiled" or "python")."""
    if name == "python":
        return _pykernels
    if name == "compiled":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
