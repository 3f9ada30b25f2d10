"""Backend selection: compiled kernels when available, pure Python otherwise.

Set ``TRANSMITTANCE_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _reference

try:
    if os.environ.get("TRANSMITTANCE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _kernels
except ImportError:  # pragma: no cover - depends on the build
    _kernels = None

_DUMMY = np.zeros(1)


class _Python:
    name = "python"

    @staticmethod
    def run_block(plan, field, n, rng):
        return _reference.run_block(plan, field, n, rng)


class _Compiled:
    name = "cython"

    @staticmethod
    def run_block(plan, field, n, rng):
        packed = getattr(field, "packed", None)
        if packed is None:
            # user-defined profiles have no compiled twin
            return _reference.run_block(plan, field, n, rng)
        fkind, fparams = packed
        ints, floats = plan.pack()
        warp = plan.sampler.warp
        if warp is None:
            cdf = mass = _DUMMY
        else:
            cdf, mass = warp.arrays
        return _kernels.run_block(ints, floats, fkind, fparams, cdf, mass, n, rng)


PYTHON = _Python()
COMPILED = _Compiled() if _kernels is not None else None
DEFAULT = COMPILED or PYTHON


def available() -> list[str]:
    return [b.name for b in (COMPILED, PYTHON) if b is not None]


def get(name: str | None = None):
    if name is None:
        return DEFAULT
    if name == "python":
        return PYTHON
    if name == "cython":
        if COMPILED is None:
            raise RuntimeError("compiled kernels are not built; reinstall with a C compiler")
        return COMPILED
    raise ValueError(f"unknown backend {name!r}")
