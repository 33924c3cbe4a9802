"""Kernel backend selection.

The compiled ``_core`` extension is used when importable; otherwise the
pure-Python kernels in ``_pure`` take over.  ``TOWERSITE_BACKEND`` set to
``pure`` or ``core`` forces a choice.
"""

import logging
import os

from . import _pure

log = logging.getLogger(__name__)

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

_BACKENDS = {"pure": _pure}
if _core is not None:
    _BACKENDS["core"] = _core


def available():
    return sorted(_BACKENDS)


def _initial():
    want = os.environ.get("TOWERSITE_BACKEND", "").strip().lower()
    if want:
        if want not in _BACKENDS:
            raise ImportError(f"TOWERSITE_BACKEND={want!r} is not available ({available()})")
        return _BACKENDS[want]
    if _core is None:
        log.info("compiled kernels unavailable, using pure-Python fallback")
    return _core or _pure


_active = _initial()


def get():
    return _active


def use(name):
    """Switch the process-wide backend; returns the previous one's name."""
    global _active
    prev = _active.NAME
    _active = _BACKENDS[name]
    return prev


def resolve_threads(threads):
    """Worker count for a ``threads`` knob where 0 means all cores."""
    if threads and threads > 0:
        return int(threads)
    return os.cpu_count() or 1
