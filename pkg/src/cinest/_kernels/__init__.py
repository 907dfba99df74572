"""Simulation kernel backends.

The per-step recursion dominates runtime, so a compiled (Cython) kernel
is built when a toolchain is available; a numpy implementation with
identical semantics is the fallback.  Both consume pre-drawn noise
blocks and produce bit-identical trajectories, which the test suite
asserts.

Selection: the compiled kernel is preferred when importable.  Set
``CINEST_BACKEND=python`` or ``CINEST_BACKEND=compiled`` to force one.
"""

from __future__ import annotations

import os

from . import _python

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None

__all__ = ["available_backends", "default_backend", "get_backend"]

_ENV_VAR = "CINEST_BACKEND"


def available_backends():
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "compiled")
    return tuple(names)


def default_backend():
    forced = os.environ.get(_ENV_VAR, "").strip().lower()
    if forced:
        if forced not in ("python", "compiled"):
            raise ValueError(
                f"{_ENV_VAR}={forced!r} not understood; use 'python' or 'compiled'")
        if forced == "compiled" and _compiled is None:
            raise RuntimeError(
                f"{_ENV_VAR}=compiled but the compiled kernel is not built; "
                "reinstall with a C toolchain or unset the variable")
        return forced
    return "compiled" if _compiled is not None else "python"


def get_backend(name=None):
    """Return the module implementing ``run_chunk`` for the given backend."""
    name = name or default_backend()
    if name == "python":
        return _python
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
