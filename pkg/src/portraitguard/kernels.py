"""Kernel selection: compiled extension when importable, else pure Python.

Set ``PORTRAITGUARD_PURE=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("PORTRAITGUARD_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

hungarian_max = _impl.hungarian_max
hamming_matrix = _impl.hamming_matrix
bfs_vote = _impl.bfs_vote

__all__ = ["BACKEND", "hungarian_max", "hamming_matrix", "bfs_vote"]
