"""Kernel backend selection: compiled extension when available, numpy twin otherwise.

Set FLOWGATE_PURE=1 to force the pure backend (used by the benchmark and
the parity tests).
"""

from __future__ import annotations

import logging
import os
from types import ModuleType

from . import _kernels_py

log = logging.getLogger(__name__)

try:
    from . import _hs_kernels as _compiled
except ImportError:
    _compiled = None

_FORCE_PURE = os.environ.get("FLOWGATE_PURE", "") not in ("", "0")

if _compiled is not None and not _FORCE_PURE:
    active: ModuleType = _compiled
else:
    if _compiled is None and not _FORCE_PURE:
        log.info("compiled flow kernels not built; using pure-numpy fallback")
    active = _kernels_py

ACTIVE_BACKEND: str = active.BACKEND


def available_backends() -> list[str]:
    names = ["pure"]
    if _compiled is not None:
        names.insert(0, "compiled")
    return names


def get_kernels(name: str | None = None) -> ModuleType:
    """Kernel module by name ('compiled' | 'pure'); default is the active one."""
    if name is None:
        return active
    if name == "pure":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built in this install")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")
