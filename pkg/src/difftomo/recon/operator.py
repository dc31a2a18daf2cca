"""The coded-diffraction measurement operator ``A = Q R``.

``R`` stacks ray transforms over the scheme; ``Q`` multiplies each image by
the mask and takes its DFT (zero-padded to ``2p - 1`` when oversampled).
``Q`` is unitary up to the factor ``g**2`` (``g`` the DFT grid), so the
pseudo-inverse reduces to that of ``R``, computed from the normal equations
``R^T R x = R^T y``: by conjugate gradients, or for small lattices by a
Cholesky factor of the dense normal matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, cg

from .. import fft
from ..lattice import LatticeSpec, crop_wrapped, pad_wrapped
from ..measurement import PhaseMask
from ..projector import RayTransform
from ..tilt import TiltScheme


# largest n**3 for which the dense normal matrix is factored
DIRECT_LIMIT = 8192


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    converged: bool


@dataclass(eq=False)
class MeasurementOperator:
    scheme: TiltScheme
    mask: PhaseMask | None
    spec: LatticeSpec
    oversampled: bool = False
    real_constraint: bool = True
    cg_tol: float = 1e-10
    cg_maxiter: int = 200
    solver: str = "auto"
    ray: RayTransform = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.scheme) == 0:
            raise ValueError("scheme is empty")
        if self.mask is not None and self.mask.spec.p != self.spec.p:
            raise ValueError("mask and lattice disagree on p")
        if self.solver not in ("auto", "cg", "cholesky"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.solver == "auto":
            self.solver = "cholesky" if self.spec.n**3 <= DIRECT_LIMIT else "cg"
        self.ray = RayTransform(self.spec, self.scheme.directions)
        self._mask = None if self.mask is None else self.mask.values
        self._factor = None

    @property
    def grid(self) -> int:
        return 2 * self.spec.p - 1 if self.oversampled else self.spec.p

    @property
    def data_shape(self) -> tuple[int, int, int]:
        g = self.grid
        return (len(self.scheme), g, g)

    def code(self, images: np.ndarray) -> np.ndarray:
        """``Q``: mask each image and take its DFT."""
        x = np.asarray(images, dtype=complex)
        if self._mask is not None:
            x = x * self._mask
        if self.oversampled:
            x = pad_wrapped(np.fft.fftshift(x, axes=(1, 2)), self.grid, axes=(1, 2))
        return fft.fft2(x, axes=(1, 2))

    def decode_adjoint(self, data: np.ndarray) -> np.ndarray:
        """``Q^H``."""
        g = self.grid
        x = fft.ifft2(np.asarray(data, dtype=complex), axes=(1, 2)) * (g * g)
        if self.oversampled:
            x = np.fft.ifftshift(crop_wrapped(x, self.spec.p, axes=(1, 2)), axes=(1, 2))
        if self._mask is not None:
            x = x * np.conj(self._mask)
        return x

    def forward(self, f: np.ndarray) -> np.ndarray:
        return self.code(self.ray.forward(np.asarray(f, dtype=complex)))

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return self.ray.adjoint(self.decode_adjoint(y))

    def solve_normal(self, rhs: np.ndarray, x0: np.ndarray | None = None) -> CGResult:
        """Solve ``R^T R x = rhs`` (real or complex ``rhs``)."""
        if self.solver == "cholesky":
            return self._solve_direct(rhs)
        return self._solve_cg(rhs, x0)

    def _solve_direct(self, rhs: np.ndarray) -> CGResult:
        n = self.spec.n
        if self._factor is None:
            try:
                self._factor = linalg.cho_factor(self.ray.normal_matrix())
            except linalg.LinAlgError:
                # rank-deficient scheme: fall back to the iterative path
                self.solver = "cg"
                return self._solve_cg(rhs, None)
        rhs = np.asarray(rhs).reshape(-1)
        if np.iscomplexobj(rhs):
            x = linalg.cho_solve(self._factor, rhs.real) + 1j * linalg.cho_solve(self._factor, rhs.imag)
        else:
            x = linalg.cho_solve(self._factor, rhs)
        return CGResult(x.reshape(n, n, n), 0, True)

    def _solve_cg(self, rhs: np.ndarray, x0: np.ndarray | None) -> CGResult:
        n = self.spec.n
        shape = (n, n, n)
        dtype = float if np.isrealobj(rhs) else complex
        op = LinearOperator((n**3, n**3), matvec=lambda v: self.ray.normal(v.reshape(shape)).ravel(), dtype=dtype)
        count = [0]

        def cb(_):
            count[0] += 1

        start = None if x0 is None else np.asarray(x0, dtype=dtype).ravel()
        x, info = cg(op, np.asarray(rhs, dtype=dtype).ravel(), x0=start, rtol=self.cg_tol, atol=0.0, maxiter=self.cg_maxiter, callback=cb)
        return CGResult(x.reshape(shape), count[0], info == 0)

    def pinv(self, y: np.ndarray, x0: np.ndarray | None = None, real: bool | None = None) -> CGResult:
        """``A^dagger y`` (or ``Re A^dagger y`` with the real constraint)."""
        real = self.real_constraint if real is None else real
        g = self.grid
        rhs = self.ray.adjoint(self.decode_adjoint(y)) / (g * g)
        if real:
            rhs = rhs.real
            if x0 is not None:
                x0 = np.real(x0)
        return self.solve_normal(rhs, x0)

    def project_range(self, y: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
        """``P1 = A A^dagger`` (``A Re A^dagger`` with the real constraint)."""
        return self.forward(self.pinv(y, x0).x)


def build_forward(
    scheme: TiltScheme,
    mask: PhaseMask | None,
    spec: LatticeSpec,
    oversampled: bool = False,
    real_constraint: bool = True,
    cg_tol: float = 1e-10,
    cg_maxiter: int = 200,
    solver: str = "auto",
) -> MeasurementOperator:
    """Measurement operator for ``scheme``; ``solver`` is ``cg``, ``cholesky`` or ``auto``."""
    return MeasurementOperator(scheme, mask, spec, oversampled, real_constraint, cg_tol, cg_maxiter, solver)
