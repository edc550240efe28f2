"""Traversal kernels with import-time implementation selection.

Prefers the compiled extension; falls back to the pure-Python twin when the
extension is absent or ``GRAPHFORGE_PURE=1`` is set. ``IMPLEMENTATION``
reports which twin is active.
"""

import os

from . import _pure

if os.environ.get("GRAPHFORGE_PURE"):
    _impl = _pure
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pure

IMPLEMENTATION = _impl.IMPLEMENTATION

khop_mask = _impl.khop_mask
varlen_walks = _impl.varlen_walks
shortest_walk = _impl.shortest_walk

__all__ = ["IMPLEMENTATION", "khop_mask", "varlen_walks", "shortest_walk"]
