"""Kernel backend selection.

The compiled extension is used when importable; set ``HARMONIA_PURE=1`` to
force the pure-Python twin.  Both produce identical arrays.
"""

import importlib
import os

from . import _purekernels

pure = _purekernels

try:
    compiled = importlib.import_module("harmonia._kernels")
except ImportError:  # extension not built
    compiled = None


def get(name: str | None = None):
    """Return a kernel module by name (``"compiled"``/``"pure"``) or the default."""
    if name is None:
        name = "pure" if os.environ.get("HARMONIA_PURE") or compiled is None else "compiled"
    if name == "pure":
        return pure
    if name == "compiled":
        if compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
