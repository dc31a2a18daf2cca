"""Random phase masks, coded diffraction patterns, ambiguities and shot noise."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal

from . import fft
from .lattice import LatticeSpec, Object3D, centered_range, pad_wrapped
from .projector import Direction, Family, Projection2D, RayTransform

PAT_MAGIC = b"PAT1"


@dataclass(frozen=True, eq=False)
class PhaseMask:
    """Unit-modulus mask ``exp(i phi)`` on ``Z_p^2`` (wrapped order)."""

    spec: LatticeSpec
    phases: np.ndarray = field(repr=False)

    def __post_init__(self):
        ph = np.array(self.phases, dtype=float)
        p = self.spec.p
        if ph.shape != (p, p):
            raise ValueError(f"expected phases of shape {(p, p)}, got {ph.shape}")
        ph.setflags(write=False)
        object.__setattr__(self, "phases", ph)

    @property
    def values(self) -> np.ndarray:
        return np.exp(1j * self.phases)


@dataclass(frozen=True)
class NoiseSpec:
    """Poisson scale ``s`` (expected counts are ``s * b**2``) and RNG seed."""

    s: float
    seed: int = 0

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"s must be positive, got {self.s}")


@dataclass(frozen=True, eq=False)
class DiffractionPattern:
    """Intensities on ``Z_g^2`` in wrapped order, ``g = p`` or ``2p - 1``.

    ``scale`` is 1 for noiseless data; Poisson counts carry the scale ``s``
    they were drawn with, and :meth:`magnitudes` divides it back out.
    """

    spec: LatticeSpec
    oversampled: bool
    intensities: np.ndarray = field(repr=False)
    direction: Direction | None = None
    scale: float = 1.0

    def __post_init__(self):
        v = np.array(self.intensities, dtype=float)
        g = self.grid
        if v.shape != (g, g):
            raise ValueError(f"expected intensities of shape {(g, g)}, got {v.shape}")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("intensities must be finite and nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "intensities", v)
        object.__setattr__(self, "oversampled", bool(self.oversampled))

    @property
    def grid(self) -> int:
        return 2 * self.spec.p - 1 if self.oversampled else self.spec.p

    def magnitudes(self) -> np.ndarray:
        """Estimated Fourier magnitudes ``b = sqrt(intensities / scale)``."""
        return np.sqrt(self.intensities / self.scale)


def random_phase_mask(spec: LatticeSpec, seed: int) -> PhaseMask:
    """Phases i.i.d. uniform on ``[0, 2 pi)``."""
    rng = np.random.default_rng(seed)
    return PhaseMask(spec, rng.uniform(0.0, 2 * np.pi, (spec.p, spec.p)))


def _image_array(image, p: int) -> np.ndarray:
    arr = image.values if isinstance(image, Projection2D) else image
    arr = np.asarray(arr, dtype=complex)
    if arr.shape != (p, p):
        raise ValueError(f"expected an image of shape {(p, p)}, got {arr.shape}")
    return arr


def coded_spectrum(image, mask: PhaseMask | None, spec: LatticeSpec, oversampled: bool = False) -> np.ndarray:
    """DFT of ``mask * image`` on ``Z_p^2`` or, oversampled, ``Z_{2p-1}^2``."""
    p = spec.p
    x = _image_array(image, p)
    if mask is not None:
        x = x * mask.values
    if oversampled:
        x = pad_wrapped(np.fft.fftshift(x), 2 * p - 1, axes=(0, 1))
    return fft.fft2(x)


def diffraction_pattern(image, mask: PhaseMask | None = None, oversampled: bool = False, spec: LatticeSpec | None = None) -> DiffractionPattern:
    """``|DFT(mask * image)|**2``; ``mask=None`` gives the uncoded pattern.

    ``image`` is a :class:`Projection2D` or a ``(p, p)`` wrapped-order array
    (then ``spec`` or ``mask`` supplies the lattice).
    """
    if spec is None:
        if isinstance(image, Projection2D):
            spec = image.spec
        elif mask is not None:
            spec = mask.spec
        else:
            p = np.shape(image)[0]
            spec = LatticeSpec((p + 1) // 2, p)
    direction = image.direction if isinstance(image, Projection2D) else None
    y = coded_spectrum(image, mask, spec, oversampled)
    return DiffractionPattern(spec, oversampled, np.abs(y) ** 2, direction)


def autocorrelation(image, mask: PhaseMask | None = None) -> np.ndarray:
    """``A(m) = sum_n x(n + m) conj(x(n))`` on ``Z_{2p-1}^2`` (wrapped order)."""
    x = np.asarray(image.values if isinstance(image, Projection2D) else image, dtype=complex)
    if mask is not None:
        x = x * mask.values
    c = np.fft.fftshift(x)
    return np.fft.ifftshift(signal.correlate(c, c, mode="full", method="direct"))


def ambiguity_variant(image, kind: str, shift=(0, 0), theta: float = 0.0) -> np.ndarray:
    """Trivial-ambiguity transforms of a wrapped-order image.

    ``translate``: ``x(n) -> x(n + m)`` cyclically.
    ``conjugate_flip``: ``x(n) -> conj(x(-n + m))``.
    ``global_phase``: ``x(n) -> exp(i theta) x(n)``.
    """
    x = np.asarray(image.values if isinstance(image, Projection2D) else image, dtype=complex)
    m1, m2 = (int(v) for v in shift)
    if kind == "translate":
        return np.roll(x, (-m1, -m2), axis=(0, 1))
    if kind == "conjugate_flip":
        p1, p2 = x.shape
        i = np.mod(-np.arange(p1) + m1, p1)
        j = np.mod(-np.arange(p2) + m2, p2)
        return np.conj(x[np.ix_(i, j)])
    if kind == "global_phase":
        return np.exp(1j * theta) * x
    raise ValueError(f"unknown ambiguity kind {kind!r}")


def _sample_poisson(mean: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return rng.poisson(mean).astype(float)


def poissonize(pattern: DiffractionPattern, noise: NoiseSpec, index: int = 0) -> DiffractionPattern:
    """Poisson counts with mean ``s * intensities``.

    The stream is seeded from ``(noise.seed, index)`` so each pattern of a
    stack draws independently and reproducibly.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(noise.seed), int(index)]))
    counts = _sample_poisson(noise.s * pattern.intensities / pattern.scale, rng)
    return DiffractionPattern(pattern.spec, pattern.oversampled, counts, pattern.direction, noise.s)


def poissonize_many(patterns: Sequence[DiffractionPattern], noise: NoiseSpec) -> list[DiffractionPattern]:
    return [poissonize(pat, noise, i) for i, pat in enumerate(patterns)]


def _as_list(patterns):
    return [patterns] if isinstance(patterns, DiffractionPattern) else list(patterns)


def _norms(patterns):
    b1 = sum(float(np.sum(pat.magnitudes())) for pat in patterns)
    b2 = sum(float(np.sum(pat.intensities / pat.scale)) for pat in patterns)
    return b1, b2


def nsr(patterns, noise) -> float:
    """``||b||_1 / (sqrt(s) ||b^2||_1)`` over a pattern or a stack.

    ``noise`` is a :class:`NoiseSpec` or the scale ``s`` itself.
    """
    s = noise.s if isinstance(noise, NoiseSpec) else float(noise)
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    b1, b2 = _norms(_as_list(patterns))
    if b2 == 0:
        raise ValueError("zero pattern has no defined NSR")
    return b1 / (np.sqrt(s) * b2)


def solve_s_for_nsr(patterns, target_nsr: float) -> float:
    """Scale ``s`` at which :func:`nsr` equals ``target_nsr``."""
    if not target_nsr > 0:
        raise ValueError(f"target NSR must be positive, got {target_nsr}")
    b1, b2 = _norms(_as_list(patterns))
    if b2 == 0:
        raise ValueError("zero pattern has no defined NSR")
    return (b1 / (target_nsr * b2)) ** 2


def exit_waves(obj: Object3D, directions: Sequence[Direction], model: str = "weak", q: float = 1.0) -> np.ndarray:
    """Images leaving the object, one ``(p, p)`` array per direction.

    ``weak`` is the projection itself (linearized phase), ``phase`` the
    strong-phase wave ``exp(i kappa f_t)`` and ``hybrid`` the power model
    ``(1 + i kappa f_t / q) ** q``.
    """
    imgs = RayTransform(obj.spec, directions).forward(obj.values)
    kappa = obj.spec.kappa
    if model == "weak":
        return imgs.astype(complex)
    if model == "phase":
        return np.exp(1j * kappa * imgs)
    if model == "hybrid":
        if not q >= 1:
            raise ValueError(f"q must be >= 1, got {q}")
        base = 1 + 1j * kappa * imgs / q
        return base if q == 1 else np.power(base, q)
    raise ValueError(f"unknown model {model!r}")


def simulate_patterns(
    obj: Object3D,
    directions: Sequence[Direction],
    mask: PhaseMask | None,
    oversampled: bool = False,
    model: str = "weak",
    q: float = 1.0,
) -> list[DiffractionPattern]:
    waves = exit_waves(obj, directions, model, q)
    return [
        DiffractionPattern(obj.spec, oversampled, np.abs(coded_spectrum(w, mask, obj.spec, oversampled)) ** 2, d)
        for w, d in zip(waves, directions)
    ]


def write_patterns(path, patterns: Sequence[DiffractionPattern]) -> None:
    """PAT1 stack.

    Layout: ``b"PAT1"``, count ``m`` and ``p`` as little-endian int32, an
    oversampled byte, then per pattern a family byte (255 when absent),
    alpha, beta and scale as float64, and ``g*g`` float64 intensities
    row-major in ascending frequency order.
    """
    patterns = list(patterns)
    p = patterns[0].spec.p if patterns else 0
    over = patterns[0].oversampled if patterns else False
    with open(path, "wb") as fh:
        fh.write(PAT_MAGIC)
        fh.write(struct.pack("<iiB", len(patterns), p, int(over)))
        for pat in patterns:
            if pat.oversampled != over or pat.spec.p != p:
                raise ValueError("all patterns in a stack must share p and oversampling")
            d = pat.direction
            fam = 255 if d is None else d.family.value
            a, b = (0.0, 0.0) if d is None else d.slopes
            fh.write(struct.pack("<Bddd", fam, a, b, float(pat.scale)))
            fh.write(np.ascontiguousarray(np.fft.fftshift(pat.intensities), dtype="<f8").tobytes())


def read_patterns(path, spec: LatticeSpec | None = None) -> list[DiffractionPattern]:
    raw = Path(path).read_bytes()
    if raw[:4] != PAT_MAGIC:
        raise ValueError(f"{path}: not a PAT1 file")
    m, p, over = struct.unpack_from("<iiB", raw, 4)
    if spec is None:
        spec = LatticeSpec((p + 1) // 2, p)
    elif spec.p != p:
        raise ValueError(f"{path}: p={p} does not match lattice p={spec.p}")
    g = 2 * p - 1 if over else p
    off = 13
    out = []
    for _ in range(m):
        fam, a, b, scale = struct.unpack_from("<Bddd", raw, off)
        off += 25
        vals = np.frombuffer(raw, dtype="<f8", count=g * g, offset=off).reshape(g, g)
        off += 8 * g * g
        d = None if fam == 255 else Direction(Family(fam), a, b)
        out.append(DiffractionPattern(spec, bool(over), np.fft.ifftshift(vals), d, scale))
    if off != len(raw):
        raise ValueError(f"{path}: {len(raw) - off} trailing bytes")
    return out


def export_patterns_csv(path, patterns: Sequence[DiffractionPattern]) -> None:
    """Rows ``direction, row, col, intensity`` with centered frequency coordinates."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["direction", "row", "col", "intensity"])
        for idx, pat in enumerate(patterns):
            g = pat.grid
            zg = centered_range(g)
            vals = np.fft.fftshift(pat.intensities)
            for a, r in enumerate(zg):
                for b, c in enumerate(zg):
                    w.writerow([idx, int(r), int(c), f"{vals[a, b]:.17g}"])
