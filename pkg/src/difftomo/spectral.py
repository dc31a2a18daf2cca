"""Discrete Fourier transforms, Fourier slices and common sets.

The 3D transform of an object lives on ``Z_p^3`` but extends to a trigonometric
(Laurent) polynomial in each frequency, since the object is supported on
``Z_n^3``.  A projection's 2D transform samples that polynomial on a tilted
plane whose family-axis coordinate is generally non-integer; ``fourier_slice``
evaluates it there exactly rather than interpolating the sampled spectrum.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import fft
from .lattice import LatticeSpec, Object3D, crop_wrapped
from .projector import _AXES, Direction, Projection2D, project, to_canonical


@dataclass(frozen=True, eq=False)
class Spectrum3D:
    """``f^(xi, eta, zeta)`` on ``Z_p^3`` in wrapped order."""

    spec: LatticeSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        p = self.spec.p
        if v.shape != (p, p, p):
            raise ValueError(f"expected shape {(p, p, p)}, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def at(self, xi: int, eta: int, zeta: int) -> complex:
        p = self.spec.p
        return complex(self.values[xi % p, eta % p, zeta % p])

    def partial(self, family) -> np.ndarray:
        """Transform along the two image axes only, canonical layout ``(n, p, p)``.

        Axis 0 runs over ``Z_n`` (ascending) of the family axis.
        """
        g = fft.ifft(to_canonical(self.values, family), axis=0)
        return crop_wrapped(g, self.spec.n, axes=(0,))


@dataclass(frozen=True)
class CommonLinePair:
    """Integer slice coordinates ``k`` on ``t`` and ``k_prime`` on ``t'``."""

    k: tuple[int, int]
    k_prime: tuple[int, int]


def dft3(obj: Object3D) -> Spectrum3D:
    """``sum_{i,j,k in Z_n} f(i,j,k) exp(-2 pi i (xi i + eta j + zeta k) / p)``."""
    return Spectrum3D(obj.spec, fft.fftn(obj.padded(), axes=(0, 1, 2)))


def dft2(proj: Projection2D) -> np.ndarray:
    """2D DFT of a projection on ``Z_p^2`` (wrapped order)."""
    return fft.fft2(np.asarray(proj.values, dtype=complex))


def _slice_on_grid(spec3: Spectrum3D, direction: Direction, k1, k2) -> np.ndarray:
    """Evaluate the slice polynomial at integer image frequencies ``(k1, k2)``."""
    spec = spec3.spec
    p = spec.p
    part = spec3.partial(direction.family)
    k1 = np.asarray(k1)
    k2 = np.asarray(k2)
    w = -(float(direction.alpha) * k1 + float(direction.beta) * k2)
    zn = spec.zn.astype(float)
    phase = np.exp(-2j * np.pi * w[..., None] * zn / p)
    cols = part[:, np.mod(k1, p), np.mod(k2, p)]
    return np.einsum("...i,i...->...", phase, cols)


def fourier_slice(spec3: Spectrum3D, direction: Direction, k) -> complex:
    """Spectrum on the plane orthogonal to ``direction`` at slice coordinates ``k``.

    For family X and ``k = (eta, zeta)`` this is ``f^(-alpha eta - beta zeta, eta, zeta)``
    with the first argument evaluated by the band-limited extension.
    """
    k1, k2 = (int(v) for v in k)
    return complex(_slice_on_grid(spec3, direction, k1, k2))


def slice_image(spec3: Spectrum3D, direction: Direction) -> np.ndarray:
    """Fourier slice on all of ``Z_p^2`` in wrapped order."""
    f = spec3.spec.freqs()
    k1, k2 = np.meshgrid(f, f, indexing="ij")
    return _slice_on_grid(spec3, direction, k1, k2)


def verify_slice_theorem(obj: Object3D, direction: Direction) -> float:
    """``max_k |dft2(project(obj, t))(k) - fourier_slice(dft3(obj), t, k)|``."""
    lhs = dft2(project(obj, direction))
    rhs = slice_image(dft3(obj), direction)
    return float(np.abs(lhs - rhs).max())


def _exact(v):
    return v if isinstance(v, Fraction) else None


def _slice_point(direction: Direction, k1, k2):
    """3D frequency of slice coordinate ``(k1, k2)``, as a list indexed by axis."""
    out = [None, None, None]
    f, a1, a2 = _AXES[direction.family]
    out[a1], out[a2] = k1, k2
    out[f] = -(direction.alpha * k1 + direction.beta * k2)
    return out


def common_line_points(t: Direction, t_prime: Direction, spec: LatticeSpec, tol: float = 1e-12) -> list[CommonLinePair]:
    """Integer points shared by the Fourier slices of ``t`` and ``t_prime``.

    A pair ``(k, k')`` is listed when the slice point of ``t`` at ``k`` is the
    slice point of ``t'`` at ``k'`` with both in ``Z_p^2``.  Membership is exact
    when every slope involved is a :class:`~fractions.Fraction`, and within
    ``tol`` otherwise.
    """
    if np.linalg.norm(np.cross(t.vector(), t_prime.vector())) <= tol:
        raise ValueError("directions are parallel")
    exact = all(_exact(v) is not None for v in (t.alpha, t.beta, t_prime.alpha, t_prime.beta))
    zp = spec.zp
    lo, hi = int(zp[0]), int(zp[-1])
    fp, b1, b2 = _AXES[t_prime.family]
    out = []
    for k1 in zp:
        for k2 in zp:
            k1i, k2i = int(k1), int(k2)
            if exact:
                w = _slice_point(t, Fraction(k1i), Fraction(k2i))
            else:
                w = [float(v) for v in _slice_point(Direction(t.family, float(t.alpha), float(t.beta)), k1i, k2i)]
            kp = []
            ok = True
            for v in (w[b1], w[b2]):
                r = round(v)
                if (v != r) if exact else abs(v - r) > tol:
                    ok = False
                    break
                if not lo <= r <= hi:
                    ok = False
                    break
                kp.append(int(r))
            if not ok:
                continue
            if exact:
                target = -(t_prime.alpha * kp[0] + t_prime.beta * kp[1])
                hit = w[fp] == target
            else:
                target = -(float(t_prime.alpha) * kp[0] + float(t_prime.beta) * kp[1])
                hit = abs(w[fp] - target) <= tol
            if hit:
                out.append(CommonLinePair((k1i, k2i), (kp[0], kp[1])))
    return out
