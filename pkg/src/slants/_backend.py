"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
always available.  Set SLANTS_BACKEND=python or =compiled to force one, or
call use() at runtime (the CLI exposes this as --backend).
"""

import os

from . import _kernels_py

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled


def available():
    return sorted(_BACKENDS)


def use(name):
    """Select the active kernel backend by name ('python' or 'compiled')."""
    global active
    if name in ("auto", None):
        name = "compiled" if _compiled is not None else "python"
    if name not in _BACKENDS:
        raise ValueError(
            f"backend {name!r} not available; choices: {available()}"
        )
    active = _BACKENDS[name]
    return active


def get(name):
    """Return a backend module without changing the active selection."""
    if name not in _BACKENDS:
        raise ValueError(
            f"backend {name!r} not available; choices: {available()}"
        )
    return _BACKENDS[name]


active = use(os.environ.get("SLANTS_BACKEND", "auto"))
