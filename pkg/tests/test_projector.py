import math
from fractions import Fraction

import numpy as np
import pytest

from difftomo import kernels
from difftomo.lattice import LatticeSpec, Object3D, interpolate
from difftomo.projector import (
    Direction,
    Family,
    Projection2D,
    RayTransform,
    hybrid_projection,
    phase_projection,
    project,
    project_many,
    projection_matrix,
    read_projections,
    support_bounds,
    support_leakage,
    to_canonical,
    write_projections,
)


def brute_projection(obj, d):
    """Line sums of the band-limited interpolant, point by point."""
    spec = obj.spec
    out = np.zeros((spec.p, spec.p), dtype=complex)
    i = spec.zn.astype(float)
    for c1 in spec.zp:
        for c2 in spec.zp:
            pts = [None] * 3
            f = d.family.value
            a1, a2 = [ax for ax in range(3) if ax != f] if d.family is not Family.Z else (0, 1)
            pts[f] = i
            pts[a1] = c1 + float(d.alpha) * i
            pts[a2] = c2 + float(d.beta) * i
            out[c1 % spec.p, c2 % spec.p] = interpolate(obj, *pts).sum()
    return out


def test_direction_validation():
    with pytest.raises(ValueError):
        Direction.x(1.0, 0.0)
    with pytest.raises(ValueError):
        Direction.z(0.0, -1.0)
    d = Direction("y", Fraction(1, 3), 0.5)
    assert d.family is Family.Y and isinstance(d.alpha, Fraction)
    assert np.allclose(d.vector(), [1 / 3, 1, 0.5])


def test_from_vector():
    d = Direction.from_vector([0.2, -0.5, 1.0])
    assert d.family is Family.Z and d.slopes == (0.2, -0.5)
    d = Direction.from_vector([-2.0, 1.0, 0.5])
    assert d.family is Family.X and d.slopes == (-0.5, -0.25)
    tie = Direction.from_vector([1.0, 1.0, 0.0])
    assert tie.family is Family.X and tie.alpha < 1
    with pytest.raises(ValueError):
        Direction.from_vector([0, 0, 0])


@pytest.mark.parametrize("d", [Direction.x(0.3, -0.4), Direction.y(-0.7, 0.2), Direction.z(0.55, 0.1)])
def test_project_matches_brute_force(d, rng):
    spec = LatticeSpec(5)
    obj = Object3D(spec, rng.standard_normal((5, 5, 5)))
    assert np.allclose(project(obj, d).values, brute_projection(obj, d), atol=1e-12)


def test_project_matches_kernel_and_matrix(rng):
    spec = LatticeSpec(5, 11)
    f = rng.standard_normal((5, 5, 5))
    obj = Object3D(spec, f)
    for fam in Family:
        d = Direction(fam, 0.21, -0.83)
        img = project(obj, d).values
        ref = kernels.dirichlet_line_sums(to_canonical(f, fam), 0.21, -0.83, spec.p)
        assert np.allclose(img, ref, atol=1e-12)
        assert np.allclose(projection_matrix(d, spec) @ f.ravel(), img.ravel(), atol=1e-12)


def test_axis_aligned_projection_is_plain_sum(rng):
    spec = LatticeSpec(5)
    f = rng.standard_normal((5, 5, 5))
    img = project(Object3D(spec, f), Direction.z()).centered()
    assert np.allclose(img[2:7, 2:7], f.sum(axis=2), atol=1e-12)
    assert np.allclose(img[:2], 0, atol=1e-12)


def test_real_object_gives_real_projection(rng):
    spec = LatticeSpec(5)
    img = project(Object3D(spec, rng.standard_normal((5, 5, 5))), Direction.x(0.4, 0.3)).values
    assert np.isrealobj(img)


def test_adjoint_identity(rng):
    spec = LatticeSpec(5)
    R = RayTransform(spec, [Direction.x(0.3, -0.4), Direction.y(-0.7, 0.2), Direction.z(0.55, 0.1), Direction.z(-0.1, 0.9)])
    for _ in range(5):
        f = rng.standard_normal((5, 5, 5)) + 1j * rng.standard_normal((5, 5, 5))
        y = rng.standard_normal((4, 9, 9)) + 1j * rng.standard_normal((4, 9, 9))
        lhs, rhs = np.vdot(R.forward(f), y), np.vdot(f, R.adjoint(y))
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_normal_matrix_and_operator_agree(rng):
    spec = LatticeSpec(4, 9)
    R = RayTransform(spec, [Direction(Family(i % 3), *rng.uniform(-1, 1, 2)) for i in range(9)])
    f = rng.standard_normal((4, 4, 4))
    G = R.normal_matrix()
    assert np.allclose(G, G.T, atol=1e-13)
    assert np.allclose(G @ f.ravel(), R.normal(f).ravel(), atol=1e-12)
    assert np.allclose(R.normal(f), R.adjoint(R.forward(f)), atol=1e-12)


def test_phase_and_hybrid(rng):
    spec = LatticeSpec(3)
    obj = Object3D(spec, 0.1 * rng.standard_normal((3, 3, 3)))
    d = Direction.y(0.2, 0.1)
    f_t = project(obj, d).values
    assert np.allclose(phase_projection(obj, d).values, np.exp(1j * math.pi * f_t))
    assert np.allclose(hybrid_projection(obj, d, 1).values, 1 + 1j * math.pi * f_t)
    big = hybrid_projection(obj, d, 1e6).values
    assert np.allclose(big, np.exp(1j * math.pi * f_t), atol=1e-5)
    with pytest.raises(ValueError):
        hybrid_projection(obj, d, 0.5)


def test_support_bounds_formula():
    spec = LatticeSpec(7)
    assert support_bounds(Direction.z(), spec) == (7, 7)
    assert support_bounds(Direction.z(0.5, -0.99), spec) == (9, 11)
    assert support_bounds(Direction.x(-0.34, 0.0), spec) == (9, 7)


def test_axis_aligned_support_is_exact(rng):
    spec = LatticeSpec(5)
    proj = project(Object3D(spec, rng.standard_normal((5, 5, 5))), Direction.x())
    assert support_leakage(proj) < 1e-12


def test_projection_requires_shape():
    with pytest.raises(ValueError):
        Projection2D(LatticeSpec(3), Direction.z(), np.zeros((4, 4)))


def test_prj_round_trip(tmp_path, rng):
    spec = LatticeSpec(3)
    obj = Object3D(spec, rng.standard_normal((3, 3, 3)))
    projs = project_many(obj, [Direction.x(0.1, 0.2), Direction.z(-0.5, 0.25)])
    write_projections(tmp_path / "s.prj", projs)
    back = read_projections(tmp_path / "s.prj")
    assert [q.direction for q in back] == [q.direction for q in projs]
    for a, b in zip(projs, back):
        assert np.array_equal(a.values, b.values)


def test_linearity_and_zero_sum(rng):
    spec = LatticeSpec(5)
    f = rng.standard_normal((5, 5, 5))
    g = rng.standard_normal((5, 5, 5))
    d = Direction.y(0.37, -0.61)
    lhs = project(Object3D(spec, 2 * f - 3 * g), d).values
    rhs = 2 * project(Object3D(spec, f), d).values - 3 * project(Object3D(spec, g), d).values
    assert np.allclose(lhs, rhs, atol=1e-12)
    assert project(Object3D(spec, f), d).values.sum() == pytest.approx(f.sum(), rel=1e-10)


def test_continuity_in_direction(rng):
    spec = LatticeSpec(5)
    f = rng.standard_normal((5, 5, 5))
    a = project(Object3D(spec, f), Direction.z(0.3, 0.2)).values
    b = project(Object3D(spec, f), Direction.z(0.3 + 1e-6, 0.2)).values
    assert np.abs(a - b).max() < 1e-3 * 5 * np.abs(f).max()
