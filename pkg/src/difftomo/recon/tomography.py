"""Exact reconstruction from ``n`` same-family projections.

At each nonzero frequency ``(k1, k2)`` the projections' 2D DFTs are values of
the slice polynomial ``sum_j F(j, k1, k2) exp(-2 pi i u_l j / p)`` with
``u_l = -(alpha_l k1 + beta_l k2)``, a Vandermonde system in ``F``.  At
``(0, 0)`` every node coincides; that column is instead recovered from the
zero padding: with it set to zero, each slice's inverse DFT is off by the
constant ``-F(j, 0, 0) / p**2``, which is exposed on the pixels outside
``Z_n^2``.

The per-frequency systems ignore that each slice of ``F`` is supported on
``Z_n^2``, so single frequencies can be far worse conditioned than the ray
transform as a whole.  A few steps of iterative refinement on the normal
equations of the full transform remove that amplified rounding error.
"""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from scipy import linalg

from .. import fft
from ..lattice import LatticeSpec, Object3D, centered_range, crop_wrapped
from ..projector import Family, Projection2D, RayTransform, from_canonical
from ..tilt import DiversityReport, TiltScheme, diversity_check, vandermonde_solve_batch


class DiversityError(ValueError):
    """The projection directions fail the diversity condition."""

    def __init__(self, report: DiversityReport):
        super().__init__(f"diversity condition fails: min node gap {report.min_node_gap:.3e} at {report.worst_pair}")
        self.report = report


def _as_projections(projections) -> list[Projection2D]:
    if isinstance(projections, Mapping):
        out = []
        for d, proj in projections.items():
            if proj.direction != d:
                proj = Projection2D(proj.spec, d, proj.values)
            out.append(proj)
        return out
    return list(projections)


REFINE_LIMIT = 8192  # largest n**3 for which the dense normal matrix is built


def _refine(f: np.ndarray, projs: list[Projection2D], spec: LatticeSpec, steps: int = 3) -> np.ndarray:
    """Iterative refinement ``f += (R^T R)^-1 R^T (y - R f)``."""
    ray = RayTransform(spec, [q.direction for q in projs])
    try:
        factor = linalg.cho_factor(ray.normal_matrix())
    except linalg.LinAlgError:
        return f
    y = np.stack([np.asarray(q.values, dtype=complex) for q in projs])
    res = y - ray.forward(f)
    norm = np.linalg.norm(res)
    for _ in range(steps):
        g = ray.adjoint(res).reshape(-1)
        step = linalg.cho_solve(factor, np.stack([g.real, g.imag], axis=1))
        trial = f + (step[:, 0] + 1j * step[:, 1]).reshape(f.shape)
        trial_res = y - ray.forward(trial)
        trial_norm = np.linalg.norm(trial_res)
        if not trial_norm < norm:
            break
        f, res, norm = trial, trial_res, trial_norm
    return f


def vandermonde_tomography(
    projections, spec: LatticeSpec, family: Family | None = None, tol: float = 1e-9, refine: bool = True
) -> Object3D:
    """Invert the ray transform from projections of one family.

    ``projections`` is a mapping ``Direction -> Projection2D`` or a sequence
    of projections.  The family with the most projections is used unless
    ``family`` is given; at least ``n`` are needed, and more are combined by
    least squares.  ``refine`` polishes the result against the full ray
    transform of the projections used (skipped when ``n**3 > REFINE_LIMIT``).
    """
    projs = _as_projections(projections)
    n, p = spec.n, spec.p
    if family is None:
        if not projs:
            raise ValueError(f"need at least n = {n} projections of one family, got none")
        family = max(Family, key=lambda f: (sum(q.direction.family is f for q in projs), -f.value))
    projs = [q for q in projs if q.direction.family is family]
    if len(projs) < n:
        raise ValueError(f"need at least n = {n} projections of one family, family {family.name} has {len(projs)}")
    for q in projs:
        if q.spec.p != p:
            raise ValueError(f"projection lattice p={q.spec.p} does not match p={p}")
    report = diversity_check(TiltScheme(tuple(q.direction for q in projs), 1.0), spec, tol, family)
    if not report.satisfied:
        raise DiversityError(report)

    spectra = fft.fft2(np.stack([np.asarray(q.values, dtype=complex) for q in projs]), axes=(1, 2))
    k = spec.freqs()
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    nz = (k1 != 0) | (k2 != 0)
    k1, k2 = k1[nz], k2[nz]
    a = np.array([float(q.direction.alpha) for q in projs])
    b = np.array([float(q.direction.beta) for q in projs])
    u = -(k1[:, None] * a + k2[:, None] * b)
    rhs = spectra[:, k1 % p, k2 % p].T
    cols = vandermonde_solve_batch(u, rhs, spec, tol)

    part = np.zeros((n, p, p), dtype=complex)
    part[:, k1 % p, k2 % p] = cols.T
    slices = fft.ifft2(part, axes=(1, 2))
    inside = np.zeros(p, dtype=bool)
    inside[centered_range(n) % p] = True
    outside = ~(inside[:, None] & inside[None, :])
    if outside.any():
        slices += -slices[:, outside].mean(axis=1)[:, None, None]
    else:
        # n = 1: the lone voxel is the DC value of any projection
        slices[:] = spectra[:, 0, 0].mean() / (p * p)
    canon = crop_wrapped(slices, n, axes=(1, 2))
    f = from_canonical(canon, family)
    if refine and 1 < n**3 <= REFINE_LIMIT:
        f = _refine(f, projs, spec)
    return Object3D(spec, f)
