"""Kernel backend selection.

The stiffness assembly spends nearly all of its time restricting basis
functions to lines and evaluating fractional kernels. That loop exists
twice: a Cython extension (``_speedups``) and a pure-Python twin
(``_speedups_py``). The compiled one is preferred when importable; set
``CVFRAC_KERNELS=python`` (or ``compiled``) to force a choice.
"""

from __future__ import annotations

import os

from . import _speedups_py

try:
    from . import _speedups
except ImportError:
    _speedups = None

_FORCED = os.environ.get("CVFRAC_KERNELS", "").strip().lower()


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _speedups is not None else ("python",)


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (None picks the default)."""
    if name is None or name == "auto":
        name = _FORCED or ("compiled" if _speedups is not None else "python")
    if name == "python":
        return _speedups_py
    if name == "compiled":
        if _speedups is None:
            raise RuntimeError("compiled kernels requested but the extension is not built")
        return _speedups
    raise ValueError(f"unknown kernel backend {name!r}")


def backend_name() -> str:
    """Name of the backend used by default."""
    return "compiled" if get_backend().compiled else "python"
