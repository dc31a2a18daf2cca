import numpy as np
import pytest

from difftomo.lattice import LatticeSpec
from difftomo.measurement import random_phase_mask
from difftomo.projector import Direction
from difftomo.recon import build_forward
from difftomo.tilt import TiltScheme, tset_scheme


def cplx(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.mark.parametrize("oversampled", [False, True])
def test_adjoint_identity(oversampled, rng):
    spec = LatticeSpec(4, 9)
    op = build_forward(tset_scheme(4, 0), random_phase_mask(spec, 0), spec, oversampled)
    for _ in range(20):
        f, y = cplx(rng, (4, 4, 4)), cplx(rng, op.data_shape)
        lhs, rhs = np.vdot(op.forward(f), y), np.vdot(f, op.adjoint(y))
        assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


def test_forward_of_delta_is_flat():
    spec = LatticeSpec(3)
    op = build_forward(TiltScheme((Direction.z(),), 0.1), None, spec)
    f = np.zeros((3, 3, 3))
    f[1, 1, 1] = 1
    assert np.allclose(np.abs(op.forward(f)), 1.0)


@pytest.mark.parametrize("solver", ["cg", "cholesky"])
def test_pinv_inverts_forward(solver, rng):
    spec = LatticeSpec(7)
    op = build_forward(tset_scheme(7, 1), random_phase_mask(spec, 1), spec, solver=solver, real_constraint=False)
    f = cplx(rng, (7, 7, 7))
    sol = op.pinv(op.forward(f))
    assert sol.converged
    assert np.linalg.norm(sol.x - f) / np.linalg.norm(f) < 1e-6


def test_real_constraint_keeps_real_part(rng):
    spec = LatticeSpec(3)
    op = build_forward(tset_scheme(3, 2), random_phase_mask(spec, 2), spec)
    f = cplx(rng, (3, 3, 3))
    x = op.pinv(op.forward(f)).x
    assert np.allclose(x, f.real, atol=1e-8)


def test_range_projection_idempotent(rng):
    spec = LatticeSpec(5)
    op = build_forward(tset_scheme(5, 3), random_phase_mask(spec, 3), spec, solver="cg")
    y = cplx(rng, op.data_shape)
    p1 = op.project_range(y)
    p2 = op.project_range(p1)
    assert np.linalg.norm(p2 - p1) < 10 * op.cg_tol * np.linalg.norm(p1) * 10


def test_solver_choice():
    spec = LatticeSpec(3)
    assert build_forward(tset_scheme(3, 0), None, spec).solver == "cholesky"
    assert build_forward(tset_scheme(3, 0), None, spec, solver="cg").solver == "cg"
    with pytest.raises(ValueError):
        build_forward(tset_scheme(3, 0), None, spec, solver="qr")
