"""Recovery scores and probability bounds."""
from __future__ import annotations

import math
import warnings

import numpy as np

from ..lattice import Object3D


def correlation(f: Object3D, f_star: Object3D) -> float:
    """Absolute correlation ``|<conj f, f_star>| / (||f|| ||f_star||)``.

    Invariant to a global phase of either argument.  Returns 0 with a
    warning when either object is zero.
    """
    if (f.spec.n, f.spec.p) != (f_star.spec.n, f_star.spec.p):
        raise ValueError(f"lattice mismatch: {f.spec} vs {f_star.spec}")
    a = np.asarray(f.values).ravel()
    b = np.asarray(f_star.values).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        warnings.warn("correlation with a zero object is undefined; returning 0", stacklevel=2)
        return 0.0
    return float(min(1.0, abs(np.vdot(a, b)) / (na * nb)))


def sector_bound(n: int, a: float, b: float, S: int) -> float:
    """``1 - n**2 |(b - a) / 2 pi| ** floor(S / 2)`` clamped at 0.

    Lower bound on the probability that the mask phases over ``S`` support
    pixels are not all confined to the sector ``[a, b]``.
    """
    width = abs(b - a)
    if width > math.pi:
        raise ValueError(f"sector [{a}, {b}] is not convex (width {width} > pi)")
    if S < 0:
        raise ValueError(f"S must be nonnegative, got {S}")
    return max(0.0, 1.0 - n**2 * (width / (2 * math.pi)) ** (S // 2))


def sector_bound_union(n: int, a: float, b: float, S: int, directions: int) -> float:
    """Union bound over ``directions`` projections: ``1 - |T| n**2 r**floor(S/2)``."""
    width = abs(b - a)
    if width > math.pi:
        raise ValueError(f"sector [{a}, {b}] is not convex (width {width} > pi)")
    return max(0.0, 1.0 - directions * n**2 * (width / (2 * math.pi)) ** (S // 2))
