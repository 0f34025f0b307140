"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the
pure-NumPy reference is always available. Set MARIS_KERNEL=python to
force the reference implementation (useful for reproducing frozen
regression values independently of the build), or MARIS_KERNEL=compiled
to fail loudly if the extension is missing.
"""

from __future__ import annotations

import os

from . import reference

try:
    from . import _fast  # type: ignore[attr-defined]
except ImportError:
    _fast = None

_choice = os.environ.get("MARIS_KERNEL", "auto").lower()
if _choice in ("python", "py", "reference"):
    _impl = reference
    BACKEND = "python"
elif _choice in ("compiled", "c", "fast"):
    if _fast is None:
        raise ImportError("MARIS_KERNEL=compiled but the extension is not built")
    _impl = _fast
    BACKEND = "compiled"
else:
    _impl = _fast if _fast is not None else reference
    BACKEND = "compiled" if _fast is not None else "python"

ma_eval = _impl.ma_eval
channel_rows = _impl.channel_rows


def backend() -> str:
    """Name of the active backend: 'compiled' or 'python'."""
    return BACKEND


def available_backends() -> dict:
    """All importable backends by name, for side-by-side benchmarking."""
    out = {"python": reference}
    if _fast is not None:
        out["compiled"] = _fast
    return out
