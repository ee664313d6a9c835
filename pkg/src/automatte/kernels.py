"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy implementations in ``_pykernels`` take over.  Set
``AUTOMATTE_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from automatte import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("AUTOMATTE_PURE_PYTHON") != "1":
    try:
        from automatte import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

UPPER_OFFSETS = _pykernels.UPPER_OFFSETS

slic_assign = _impl.slic_assign
slic_accumulate = _impl.slic_accumulate
morph_disk = _impl.morph_disk
laplacian_bands = _impl.laplacian_bands
window_laplacians = _impl.window_laplacians


def available_backends() -> dict:
    """Name -> module for every backend that can be imported here."""
    out = {"python": _pykernels}
    try:
        from automatte import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


def default_threads() -> int:
    env = os.environ.get("AUTOMATTE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"AUTOMATTE_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError("AUTOMATTE_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1
