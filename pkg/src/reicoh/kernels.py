"""Kernel backend selection.

The compiled extension ``reicoh._kernels`` is used when it imports; otherwise
the numpy implementation in ``reicoh._kernels_py`` takes over. Both expose the
same functions, so callers use :data:`active` and never branch on backend.
"""

import logging

from . import _kernels_py as python

log = logging.getLogger(__name__)

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None
    log.debug("compiled kernels unavailable; using numpy fallback")

active = compiled if compiled is not None else python
BACKEND = "compiled" if compiled is not None else "python"

__all__ = ["active", "compiled", "python", "BACKEND"]
