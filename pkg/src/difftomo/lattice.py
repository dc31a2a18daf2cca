"""Discrete objects on the centered lattice and their band-limited interpolation.

Index conventions
-----------------
``Z_m`` is the centered integer range ``[-(m//2), m - m//2 - 1]``.  Objects are
stored as ``(n, n, n)`` arrays in ascending coordinate order, so array index
``a`` holds lattice coordinate ``a - n//2``.  Anything living on ``Z_p`` (padded
objects, projections, spectra) is stored in wrapped order: index 0 is the
origin and negative coordinates wrap to the end, which is what the FFT expects.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

VOL_MAGIC = b"VOL1"


def centered_range(m: int) -> np.ndarray:
    """Integers of ``Z_m`` in ascending order."""
    return np.arange(-(m // 2), m - m // 2)


def sinpi(x):
    """``sin(pi x)`` that is exactly zero at integers."""
    x = np.asarray(x, dtype=float)
    k = np.round(x)
    r = x - k
    sign = np.where(np.mod(k, 2) == 0, 1.0, -1.0)
    return sign * np.sin(np.pi * r)


@dataclass(frozen=True)
class LatticeSpec:
    """Object extent ``n``, padded extent ``p`` and wavenumber ``kappa``.

    ``p`` defaults to ``2n - 1`` and must be odd; ``kappa`` defaults to pi,
    which makes the wrap period ``2 pi / kappa`` equal to 2.
    """

    n: int
    p: int | None = None
    kappa: float = math.pi

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        p = 2 * n - 1 if self.p is None else int(self.p)
        if p % 2 == 0:
            raise ValueError(f"p must be odd, got {p}")
        if p < 2 * n - 1:
            raise ValueError(f"p must be >= 2n-1 = {2 * n - 1}, got {p}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def period(self) -> float:
        """Wrap period ``2 pi / kappa`` of phase-projection data."""
        return 2 * math.pi / self.kappa

    @property
    def zn(self) -> np.ndarray:
        return centered_range(self.n)

    @property
    def zp(self) -> np.ndarray:
        return centered_range(self.p)

    def freqs(self) -> np.ndarray:
        """Integer frequencies of ``Z_p`` in FFT (wrapped) order."""
        return np.rint(np.fft.fftfreq(self.p, 1.0 / self.p)).astype(int)


@dataclass(frozen=True, eq=False)
class Object3D:
    """Complex (or real) voxel values on ``Z_n^3``, zero outside."""

    spec: LatticeSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if not (np.issubdtype(v.dtype, np.complexfloating) or np.issubdtype(v.dtype, np.floating)):
            v = v.astype(float)
        n = self.spec.n
        if v.shape != (n, n, n):
            raise ValueError(f"expected values of shape {(n, n, n)}, got {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, spec: LatticeSpec, dtype=complex) -> "Object3D":
        return cls(spec, np.zeros((spec.n,) * 3, dtype=dtype))

    @classmethod
    def delta(cls, spec: LatticeSpec, at=(0, 0, 0), value=1.0) -> "Object3D":
        v = np.zeros((spec.n,) * 3, dtype=complex)
        h = spec.n // 2
        v[at[0] + h, at[1] + h, at[2] + h] = value
        return cls(spec, v)

    def at(self, i: int, j: int, k: int):
        """Value at lattice coordinate ``(i, j, k)``; zero outside ``Z_n^3``."""
        h = self.spec.n // 2
        idx = (i + h, j + h, k + h)
        if any(a < 0 or a >= self.spec.n for a in idx):
            return 0.0
        return self.values[idx]

    def padded(self) -> np.ndarray:
        """Embedding into ``Z_p^3`` in wrapped order."""
        return pad_wrapped(self.values, self.spec.p, axes=(0, 1, 2))

    def __add__(self, other: "Object3D") -> "Object3D":
        _check_same(self.spec, other.spec)
        return Object3D(self.spec, self.values + other.values)

    def __sub__(self, other: "Object3D") -> "Object3D":
        _check_same(self.spec, other.spec)
        return Object3D(self.spec, self.values - other.values)

    def __mul__(self, c) -> "Object3D":
        return Object3D(self.spec, self.values * c)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def _check_same(a: LatticeSpec, b: LatticeSpec) -> None:
    if (a.n, a.p) != (b.n, b.p):
        raise ValueError(f"lattice mismatch: {a} vs {b}")


def pad_wrapped(values: np.ndarray, p: int, axes=(0, 1, 2)) -> np.ndarray:
    """Zero-pad centered ``Z_n`` axes to wrapped ``Z_p`` axes."""
    values = np.asarray(values)
    shape = list(values.shape)
    for ax in axes:
        shape[ax] = p
    out = np.zeros(shape, dtype=values.dtype)
    index = []
    for ax in range(values.ndim):
        if ax in axes:
            index.append(np.mod(centered_range(values.shape[ax]), p))
        else:
            index.append(np.arange(values.shape[ax]))
    out[np.ix_(*index)] = values
    return out


def crop_wrapped(values: np.ndarray, n: int, axes=(0, 1, 2)) -> np.ndarray:
    """Inverse of :func:`pad_wrapped`."""
    index = []
    for ax in range(values.ndim):
        if ax in axes:
            index.append(np.mod(centered_range(n), values.shape[ax]))
        else:
            index.append(np.arange(values.shape[ax]))
    return values[np.ix_(*index)]


SERIES_CUTOFF = 1e-6


def dirichlet_kernel(t, spec_or_p) -> np.ndarray | float:
    """p-periodic Dirichlet kernel ``D_p(t)``.

    Equal to 1 at multiples of ``p`` and ``sin(pi t) / (p sin(pi t / p))``
    elsewhere; on the integers it is the Kronecker delta modulo ``p``.
    """
    p = spec_or_p.p if isinstance(spec_or_p, LatticeSpec) else int(spec_or_p)
    t = np.asarray(t, dtype=float)
    r = t - p * np.round(t / p)
    den = p * sinpi(r / p)
    # near the peak the ratio loses everything to underflow; use its series
    small = np.abs(r) < SERIES_CUTOFF
    series = 1.0 - (np.pi * r) ** 2 * (p * p - 1) / (6.0 * p * p)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(small, series, sinpi(r) / np.where(small, 1.0, den))
    return float(out) if out.ndim == 0 else out


def interpolate(obj: Object3D, x, y, z):
    """Band-limited interpolant ``sum f(i,j,k) D_p(x-i) D_p(y-j) D_p(z-k)``.

    ``x, y, z`` may be scalars or broadcastable arrays.
    """
    zn = obj.spec.zn
    x, y, z = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, z)))
    dx = dirichlet_kernel(x[..., None] - zn, obj.spec)
    dy = dirichlet_kernel(y[..., None] - zn, obj.spec)
    dz = dirichlet_kernel(z[..., None] - zn, obj.spec)
    out = np.einsum("...i,...j,...k,ijk->...", dx, dy, dz, obj.values)
    return out[()] if out.ndim == 0 else out


def write_volume(path, obj: Object3D) -> None:
    """Write ``obj`` in VOL1 format.

    Layout: ``b"VOL1"``, ``n`` and ``p`` as little-endian int32, then ``n^3``
    complex values as little-endian float64 (re, im) pairs, row-major in
    ascending ``(i, j, k)``.
    """
    spec = obj.spec
    data = np.ascontiguousarray(obj.values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(VOL_MAGIC)
        fh.write(struct.pack("<ii", spec.n, spec.p))
        fh.write(data.tobytes(order="C"))


def read_volume(path, kappa: float = math.pi) -> Object3D:
    raw = Path(path).read_bytes()
    if raw[:4] != VOL_MAGIC:
        raise ValueError(f"{path}: not a VOL1 file")
    n, p = struct.unpack_from("<ii", raw, 4)
    count = n**3
    expected = 12 + 16 * count
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<c16", count=count, offset=12).reshape(n, n, n)
    return Object3D(LatticeSpec(n, p, kappa), values.astype(complex))
