"""Backend selection for the hot step kernels.

The compiled extension `contactkam._core` is used when importable; otherwise
the pure-numpy twins in `_core_py` take over. `CONTACTKAM_BACKEND` forces the
choice: "compiled", "python", or "auto" (default).
"""

from __future__ import annotations

import os

import numpy as np

from . import _core_py
from .errors import UsageError

try:
    from . import _core  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:
    _core = None
    HAVE_COMPILED = False

_FORCED = os.environ.get("CONTACTKAM_BACKEND", "auto").lower()
if _FORCED not in ("auto", "compiled", "python"):
    raise UsageError(f"CONTACTKAM_BACKEND must be auto, compiled or python, got {_FORCED!r}")
if _FORCED == "compiled" and not HAVE_COMPILED:
    raise UsageError("CONTACTKAM_BACKEND=compiled but the extension is not built")


def active_backend() -> str:
    if _FORCED == "python":
        return "python"
    if _FORCED == "compiled":
        return "compiled"
    return "compiled" if HAVE_COMPILED else "python"


class _CompiledStepper:
    """Thin wrapper holding the per-operator arrays for the compiled kernels."""

    def __init__(self, pot_dep, ke, ishift, frac, kappa, dt, forward):
        self.pot_dep = np.ascontiguousarray(pot_dep, dtype=float)
        self.ke = np.ascontiguousarray(ke, dtype=float)
        self.ishift = np.ascontiguousarray(ishift, dtype=np.int64)
        self.frac = np.ascontiguousarray(frac, dtype=float)
        self.kappa = float(kappa)
        self.dt = float(dt)
        self.forward = bool(forward)
        self._two_d = self.pot_dep.ndim == 3

    def scan(self, f):
        f = np.ascontiguousarray(f, dtype=float)
        args = (f, self.pot_dep, self.ke, self.ishift, self.frac, self.kappa, self.dt, self.forward)
        return _core.scan_2d(*args) if self._two_d else _core.scan_1d(*args)

    def phi_rows(self, f, krow):
        f = np.ascontiguousarray(f, dtype=float)
        krow = np.ascontiguousarray(krow, dtype=np.int64)
        args = (f, self.pot_dep, self.ke, self.ishift, self.frac, self.kappa, self.dt, self.forward, krow)
        return _core.phi_rows_2d(*args) if self._two_d else _core.phi_rows_1d(*args)


def make_stepper(pot_dep, ke, ishift, frac, kappa, dt, forward, backend: str | None = None):
    backend = backend or active_backend()
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise UsageError("compiled backend requested but the extension is not built")
        return _CompiledStepper(pot_dep, ke, ishift, frac, kappa, dt, forward)
    cls = _core_py.Stepper2D if np.ndim(pot_dep) == 3 else _core_py.Stepper1D
    return cls(pot_dep, ke, ishift, frac, kappa, dt, forward)


def interp_at(f, q, backend: str | None = None):
    """Periodic multilinear interpolation at arbitrary points in grid units."""
    backend = backend or active_backend()
    f = np.ascontiguousarray(f, dtype=float)
    if f.ndim == 1:
        q = np.ascontiguousarray(q, dtype=float).reshape(-1)
        if backend == "compiled":
            return _core.interp_at_1d(f, q)
        return _core_py.interp_at_1d(f, q)
    q = np.ascontiguousarray(q, dtype=float).reshape(-1, 2)
    if backend == "compiled":
        return _core.interp_at_2d(f, q)
    return _core_py.interp_at_2d(f, q)
