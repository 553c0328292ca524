"""Numerical tolerances used across the package.

All routines read the module-level :data:`TOL` at call time, so overriding a
field (directly or through :func:`override`) affects every later call.
"""

from __future__ import annotations

import contextlib
import dataclasses
from dataclasses import dataclass


@dataclass
class Tolerances:
    point: float = 1e-9  # |<x,x>_L + 1| for hyperboloid points
    tangent: float = 1e-9  # |<x,v>_L| and spacelike slack for tangents
    group: float = 1e-9  # entrywise slack for A J A^T = J
    det: float = 1e-8  # |det A - 1|, |det R - 1|, orthogonality of rotations
    small_angle: float = 1e-12  # exp/log series branch
    degenerate: float = 1e-12  # Lorentz norm^2 floor for normalization
    frechet_step: float = 1e-10  # Frechet mean stopping rule
    frechet_max_iter: int = 200

    def as_dict(self):
        return dataclasses.asdict(self)


TOL = Tolerances()


def set_tolerances(**overrides):
    """Update fields of :data:`TOL` in place."""
    for key, value in overrides.items():
        if not hasattr(TOL, key):
            raise KeyError(f"unknown tolerance {key!r}")
        setattr(TOL, key, type(getattr(TOL, key))(value))


@contextlib.contextmanager
def override(**overrides):
    saved = TOL.as_dict()
    try:
        set_tolerances(**overrides)
        yield TOL
    finally:
        set_tolerances(**saved)
