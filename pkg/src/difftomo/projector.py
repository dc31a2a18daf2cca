"""Discrete ray transforms along x-, y- and z-line families.

A direction of family X is ``(1, alpha, beta)``: the line through ``(0, c1, c2)``
is sampled at ``x = i`` for ``i`` in ``Z_n`` and the band-limited interpolant is
summed.  Families Y and Z are the same with the roles of the axes permuted.

The fast path treats each slice perpendicular to the family axis separately:
sampling slice ``i`` at ``(c1 + alpha*i, c2 + beta*i)`` is a fractional shift,
which for the Dirichlet interpolant is exactly a linear phase ramp in the
slice's DFT.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import fft
from .lattice import LatticeSpec, Object3D, centered_range, crop_wrapped, dirichlet_kernel, pad_wrapped

PRJ_MAGIC = b"PRJ1"


class Family(enum.Enum):
    X = 0
    Y = 1
    Z = 2

    @property
    def axis(self) -> int:
        return self.value


# (family axis, first image axis, second image axis)
_AXES = {Family.X: (0, 1, 2), Family.Y: (1, 0, 2), Family.Z: (2, 0, 1)}


def to_canonical(values: np.ndarray, family: Family) -> np.ndarray:
    """Reorder object axes as (family axis, c1 axis, c2 axis)."""
    return np.transpose(values, _AXES[family])


def from_canonical(values: np.ndarray, family: Family) -> np.ndarray:
    return np.transpose(values, np.argsort(_AXES[family]))


@dataclass(frozen=True)
class Direction:
    """Projection direction ``(1,a,b)``, ``(a,1,b)`` or ``(a,b,1)``.

    Slopes may be floats or :class:`fractions.Fraction` (kept exact for the
    common-line enumeration).
    """

    family: Family
    alpha: float | Fraction = 0.0
    beta: float | Fraction = 0.0

    def __post_init__(self):
        fam = self.family if isinstance(self.family, Family) else Family[str(self.family).upper()]
        object.__setattr__(self, "family", fam)
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not isinstance(v, Fraction):
                v = float(v)
                object.__setattr__(self, name, v)
            if not abs(v) < 1:
                raise ValueError(f"|{name}| must be < 1, got {v}")

    @classmethod
    def x(cls, alpha=0.0, beta=0.0) -> "Direction":
        return cls(Family.X, alpha, beta)

    @classmethod
    def y(cls, alpha=0.0, beta=0.0) -> "Direction":
        return cls(Family.Y, alpha, beta)

    @classmethod
    def z(cls, alpha=0.0, beta=0.0) -> "Direction":
        return cls(Family.Z, alpha, beta)

    @classmethod
    def from_vector(cls, v) -> "Direction":
        """Direction parallel to the 3-vector ``v``.

        The family is the coordinate of largest magnitude.  On an exact tie
        the first such coordinate wins and the slope is nudged just inside
        the unit interval.
        """
        v = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(v)) or not np.any(v):
            raise ValueError(f"invalid direction vector {v}")
        ax = int(np.argmax(np.abs(v)))
        fam = Family(ax)
        _, a1, a2 = _AXES[fam]
        lim = math.nextafter(1.0, 0.0)
        slopes = [float(np.clip(v[a] / v[ax], -lim, lim)) for a in (a1, a2)]
        return cls(fam, *slopes)

    def vector(self) -> np.ndarray:
        """The unnormalized vector with a unit entry in the family slot."""
        out = np.empty(3)
        f, a1, a2 = _AXES[self.family]
        out[f], out[a1], out[a2] = 1.0, float(self.alpha), float(self.beta)
        return out

    def unit_vector(self) -> np.ndarray:
        v = self.vector()
        return v / np.linalg.norm(v)

    @property
    def slopes(self) -> tuple[float, float]:
        return float(self.alpha), float(self.beta)


@dataclass(frozen=True, eq=False)
class Projection2D:
    """Image on ``Z_p^2`` in wrapped order, tagged with its direction."""

    spec: LatticeSpec
    direction: Direction
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values)
        p = self.spec.p
        if v.shape != (p, p):
            raise ValueError(f"expected shape {(p, p)}, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def at(self, c1: int, c2: int):
        p = self.spec.p
        return self.values[c1 % p, c2 % p]

    def centered(self) -> np.ndarray:
        """Values in ascending ``(c1, c2)`` order (origin in the middle)."""
        return np.fft.fftshift(self.values)


def _check_direction(direction) -> Direction:
    if not isinstance(direction, Direction):
        raise TypeError(f"expected Direction, got {type(direction).__name__}")
    return direction


def _slice_spectra(values: np.ndarray, family: Family, p: int) -> np.ndarray:
    """2D DFTs of the zero-padded slices perpendicular to the family axis."""
    g = pad_wrapped(to_canonical(values, family), p, axes=(1, 2))
    return fft.fft2(g, axes=(1, 2))


def _ramps(alphas, betas, n: int, p: int):
    """Per-slice phase ramps, shape (m, n, p) for each image axis."""
    zn = centered_range(n).astype(float)
    k = np.rint(np.fft.fftfreq(p, 1.0 / p))
    a = np.asarray(alphas, dtype=float)[:, None, None]
    b = np.asarray(betas, dtype=float)[:, None, None]
    ra = np.exp(2j * np.pi * a * zn[None, :, None] * k[None, None, :] / p)
    rb = np.exp(2j * np.pi * b * zn[None, :, None] * k[None, None, :] / p)
    return ra, rb


def project(obj: Object3D, direction: Direction) -> Projection2D:
    """Discrete ray transform of ``obj`` along ``direction``."""
    return project_many(obj, [direction])[0]


def project_many(obj: Object3D, directions: Sequence[Direction]) -> list[Projection2D]:
    """Ray transforms for several directions, sharing the slice FFTs."""
    directions = [_check_direction(d) for d in directions]
    transform = RayTransform(obj.spec, directions)
    imgs = transform.forward(obj.values)
    return [Projection2D(obj.spec, d, img) for d, img in zip(directions, imgs)]


def projection_spectrum(obj: Object3D, direction: Direction) -> np.ndarray:
    """2D DFT of the projection, computed without leaving Fourier space."""
    transform = RayTransform(obj.spec, [_check_direction(direction)])
    return transform.forward_spectra(obj.values)[0]


class RayTransform:
    """Stack of ray transforms for a fixed list of directions.

    ``forward`` maps an ``(n, n, n)`` array to ``(m, p, p)`` images;
    ``adjoint`` is its exact conjugate transpose.  The operator is real, so
    real objects give real projections.
    """

    def __init__(self, spec: LatticeSpec, directions: Sequence[Direction]):
        self.spec = spec
        self.directions = list(directions)
        if not self.directions:
            raise ValueError("at least one direction is required")
        self.groups = {}
        for fam in Family:
            idx = [i for i, d in enumerate(self.directions) if d.family is fam]
            if idx:
                alphas = [self.directions[i].alpha for i in idx]
                betas = [self.directions[i].beta for i in idx]
                ra, rb = _ramps(alphas, betas, spec.n, spec.p)
                self.groups[fam] = (np.array(idx), ra, rb)

    @property
    def shape(self):
        m, n, p = len(self.directions), self.spec.n, self.spec.p
        return (m * p * p, n**3)

    def forward_spectra(self, values: np.ndarray) -> np.ndarray:
        n, p = self.spec.n, self.spec.p
        out = np.zeros((len(self.directions), p, p), dtype=complex)
        for fam, (idx, ra, rb) in self.groups.items():
            g = _slice_spectra(values, fam, p)
            acc = np.zeros((len(idx), p, p), dtype=complex)
            for i in range(n):
                acc += ra[:, i, :, None] * rb[:, i, None, :] * g[i]
            out[idx] = acc
        return out

    def forward(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        imgs = fft.ifft2(self.forward_spectra(values), axes=(1, 2))
        return imgs.real if np.isrealobj(values) else imgs

    def adjoint_spectra(self, spectra: np.ndarray) -> np.ndarray:
        """Adjoint applied to image spectra (already DFT'd)."""
        n, p = self.spec.n, self.spec.p
        out = np.zeros((n, n, n), dtype=complex)
        for fam, (idx, ra, rb) in self.groups.items():
            s = spectra[idx]
            g = np.empty((n, p, p), dtype=complex)
            for i in range(n):
                g[i] = np.einsum("tab,ta,tb->ab", s, ra[:, i].conj(), rb[:, i].conj())
            slices = crop_wrapped(fft.ifft2(g, axes=(1, 2)), n, axes=(1, 2))
            out += from_canonical(slices, fam)
        return out

    def adjoint(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images)
        out = self.adjoint_spectra(fft.fft2(images, axes=(1, 2)))
        return out.real if np.isrealobj(images) else out

    def normal(self, values: np.ndarray) -> np.ndarray:
        """``R^T R`` applied in Fourier space (no image round trip)."""
        values = np.asarray(values)
        out = self.adjoint_spectra(self.forward_spectra(values))
        return out.real if np.isrealobj(values) else out

    def normal_matrix(self) -> np.ndarray:
        """Dense ``R^T R`` of shape ``(n**3, n**3)``.

        Summing a product of two shifted Dirichlet kernels over ``Z_p`` gives
        the kernel of the shift difference, so each direction contributes
        ``D(alpha (i - i') - (a - a')) D(beta (i - i') - (b - b'))`` in
        canonical coordinates.
        """
        n, p = self.spec.n, self.spec.p
        zn = self.spec.zn.astype(float)
        di = zn[:, None] - zn[None, :]
        out = np.zeros((n,) * 6)
        for fam, (idx, _, _) in self.groups.items():
            a = np.array([float(self.directions[t].alpha) for t in idx])
            b = np.array([float(self.directions[t].beta) for t in idx])
            # (i, j, a, c, t) with j = i' and c = a'
            ka = dirichlet_kernel(a * di[:, :, None, None, None] - di[None, None, :, :, None], p)
            kb = dirichlet_kernel(b * di[:, :, None, None, None] - di[None, None, :, :, None], p)
            ka = ka.reshape(n, n, n * n, len(idx))
            kb = kb.reshape(n, n, n * n, len(idx))
            g = np.matmul(ka, kb.transpose(0, 1, 3, 2)).reshape(n, n, n, n, n, n)
            # g[i, j, a, c, b, d] -> canonical (i, a, b, j, c, d)
            g = g.transpose(0, 2, 4, 1, 3, 5)
            inv = list(np.argsort(_AXES[fam]))
            out += g.transpose(inv + [3 + k for k in inv])
        return out.reshape(n**3, n**3)


def phase_projection(obj: Object3D, direction: Direction) -> Projection2D:
    """Exit wave ``exp(i kappa f_t)`` of a strong phase object."""
    proj = project(obj, direction)
    return Projection2D(obj.spec, direction, np.exp(1j * obj.spec.kappa * proj.values))


def hybrid_projection(obj: Object3D, direction: Direction, q: float) -> Projection2D:
    """Hybrid model ``(1 + i kappa f_t / q) ** q`` on the principal branch.

    ``q = 1`` is the weak-phase (Born) exit wave; large ``q`` approaches the
    phase projection.
    """
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    proj = project(obj, direction)
    base = 1 + 1j * obj.spec.kappa * proj.values / q
    vals = base if q == 1 else np.power(base, q)
    return Projection2D(obj.spec, direction, vals)


def support_bounds(direction: Direction, spec: LatticeSpec) -> tuple[int, int]:
    """Odd side lengths of the box ``Z_la x Z_lb`` bounding the support."""
    n = spec.n
    la = 2 * math.floor((1 + abs(float(direction.alpha))) * (n - 1) / 2) + 1
    lb = 2 * math.floor((1 + abs(float(direction.beta))) * (n - 1) / 2) + 1
    return la, lb


def support_mask(direction: Direction, spec: LatticeSpec) -> np.ndarray:
    """Boolean ``(p, p)`` wrapped-order mask of ``Z_la x Z_lb``."""
    la, lb = support_bounds(direction, spec)
    zp = np.rint(np.fft.fftfreq(spec.p, 1.0 / spec.p))
    return (np.abs(zp) <= la // 2)[:, None] & (np.abs(zp) <= lb // 2)[None, :]


def support_leakage(proj: Projection2D) -> float:
    """Largest magnitude outside the support box, relative to the peak."""
    peak = np.abs(proj.values).max()
    if peak == 0:
        return 0.0
    outside = ~support_mask(proj.direction, proj.spec)
    return float(np.abs(proj.values[outside]).max(initial=0.0) / peak)


def projection_matrix(direction: Direction, spec: LatticeSpec) -> np.ndarray:
    """Dense ``(p*p, n**3)`` real matrix of the ray transform.

    Rows follow the wrapped image order, columns the object's C order.
    """
    n, p = spec.n, spec.p
    zn = spec.zn.astype(float)
    cp = np.rint(np.fft.fftfreq(p, 1.0 / p))
    a, b = direction.slopes
    ay = dirichlet_kernel(a * zn[:, None, None] + cp[None, :, None] - zn[None, None, :], p)
    az = dirichlet_kernel(b * zn[:, None, None] + cp[None, :, None] - zn[None, None, :], p)
    # canonical column layout (i, a, b) -> object layout
    m = np.einsum("ica,idb->cdiab", ay, az).reshape(p, p, n, n, n)
    m = np.moveaxis(m, (2, 3, 4), np.array(_AXES[direction.family]) + 2)
    return m.reshape(p * p, n**3)


def write_projections(path, projections: Iterable[Projection2D]) -> None:
    """PRJ1 stack.

    Layout: ``b"PRJ1"``, count ``m`` and ``p`` as little-endian int32, then per
    projection a family byte (0=X, 1=Y, 2=Z), alpha and beta as float64, and
    ``p*p`` complex128 values row-major in ascending ``(c1, c2)``.
    """
    projections = list(projections)
    p = projections[0].spec.p if projections else 0
    with open(path, "wb") as fh:
        fh.write(PRJ_MAGIC)
        fh.write(struct.pack("<ii", len(projections), p))
        for proj in projections:
            d = proj.direction
            fh.write(struct.pack("<Bdd", d.family.value, float(d.alpha), float(d.beta)))
            fh.write(np.ascontiguousarray(proj.centered(), dtype="<c16").tobytes())


def read_projections(path, spec: LatticeSpec | None = None) -> list[Projection2D]:
    """Read a PRJ1 stack.  ``spec`` defaults to ``n = (p + 1) / 2``."""
    raw = Path(path).read_bytes()
    if raw[:4] != PRJ_MAGIC:
        raise ValueError(f"{path}: not a PRJ1 file")
    m, p = struct.unpack_from("<ii", raw, 4)
    if spec is None:
        spec = LatticeSpec((p + 1) // 2, p)
    elif spec.p != p:
        raise ValueError(f"{path}: p={p} does not match lattice p={spec.p}")
    off = 12
    out = []
    for _ in range(m):
        fam, a, b = struct.unpack_from("<Bdd", raw, off)
        off += 17
        vals = np.frombuffer(raw, dtype="<c16", count=p * p, offset=off).reshape(p, p)
        off += 16 * p * p
        out.append(Projection2D(spec, Direction(Family(fam), a, b), np.fft.ifftshift(vals).astype(complex)))
    return out
