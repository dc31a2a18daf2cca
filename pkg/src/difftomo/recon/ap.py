"""Alternating projections between the measurement range and the magnitudes."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..lattice import Object3D
from ..measurement import DiffractionPattern
from .metrics import correlation
from .operator import MeasurementOperator


@dataclass
class ReconReport:
    iterations: int
    residual_history: list = field(default_factory=list)
    correlation_history: list = field(default_factory=list)
    final_object: Object3D | None = None
    initial_residual: float = float("nan")
    flags: list = field(default_factory=list)

    @property
    def residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else self.initial_residual

    @property
    def correlation(self) -> float | None:
        return self.correlation_history[-1] if self.correlation_history else None


def stack_magnitudes(patterns) -> np.ndarray:
    """``b`` as an ``(m, g, g)`` array from patterns (counts are divided by their scale)."""
    return np.stack([pat.magnitudes() for pat in patterns])


def magnitude_projection(h: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``P2 h = b * sgn(h)`` with ``sgn(0) = 1``."""
    mag = np.abs(h)
    phase = np.where(mag > 0, h / np.where(mag > 0, mag, 1.0), 1.0)
    return b * phase


def ap_reconstruct(
    op: MeasurementOperator,
    b,
    init_seed: int = 0,
    max_iters: int = 500,
    ground_truth: Object3D | None = None,
    tol: float = 0.0,
) -> ReconReport:
    """Randomly initialized alternating projections ``(P1 P2)^k``.

    ``b`` holds the measured magnitudes, shape ``op.data_shape`` (or a list
    of :class:`DiffractionPattern`).  Iteration stops after ``max_iters`` or
    when the relative change of the iterate drops below ``tol``.
    """
    if isinstance(b, (list, tuple)) and b and isinstance(b[0], DiffractionPattern):
        b = stack_magnitudes(b)
    b = np.asarray(b, dtype=float)
    if b.shape != op.data_shape:
        raise ValueError(f"magnitudes have shape {b.shape}, operator expects {op.data_shape}")
    if np.any(b < 0):
        raise ValueError("magnitudes must be nonnegative")
    n = op.spec.n
    rng = np.random.default_rng(init_seed)
    f = (rng.standard_normal((n, n, n)) + 1j * rng.standard_normal((n, n, n))) / np.sqrt(2)
    h = op.forward(f)
    report = ReconReport(0, initial_residual=float(np.linalg.norm(b - np.abs(h))))
    cg_misses = 0
    for k in range(max_iters):
        sol = op.pinv(magnitude_projection(h, b), x0=f)
        if not sol.converged:
            cg_misses += 1
        change = np.linalg.norm(sol.x - f) / max(np.linalg.norm(sol.x), np.finfo(float).tiny)
        f = sol.x
        h = op.forward(f)
        report.iterations = k + 1
        report.residual_history.append(float(np.linalg.norm(b - np.abs(h))))
        if ground_truth is not None:
            report.correlation_history.append(correlation(Object3D(op.spec, f), ground_truth))
        if tol > 0 and change < tol:
            break
    if cg_misses:
        report.flags.append(f"cg_not_converged:{cg_misses}")
    report.final_object = Object3D(op.spec, f)
    return report


def write_report_csv(path, report: ReconReport) -> None:
    """Columns ``iteration, residual, correlation`` (blank correlation without truth)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "residual", "correlation"])
        for i, res in enumerate(report.residual_history):
            cor = report.correlation_history[i] if i < len(report.correlation_history) else None
            w.writerow([i + 1, f"{res:.17g}", "" if cor is None else f"{cor:.17g}"])
