import numpy as np
import pytest

from difftomo.lattice import LatticeSpec, Object3D
from difftomo.projector import Direction, Family, project, project_many
from difftomo.recon import DiversityError, vandermonde_tomography
from difftomo.tilt import TiltScheme, diversity_check


def diverse_family(n, fam, rng):
    spec = LatticeSpec(n)
    while True:
        dirs = [Direction(fam, *rng.uniform(-1, 1, 2)) for _ in range(n)]
        if diversity_check(TiltScheme(tuple(dirs), 1.0), spec).satisfied:
            return dirs


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("fam", list(Family))
def test_round_trip(n, fam, rng):
    spec = LatticeSpec(n)
    f = rng.standard_normal((n, n, n)) + 1j * rng.standard_normal((n, n, n))
    dirs = diverse_family(n, fam, rng)
    projs = {d: project(Object3D(spec, f), d) for d in dirs}
    rec = vandermonde_tomography(projs, spec)
    assert np.linalg.norm(rec.values - f) / np.linalg.norm(f) < 1e-8


def test_extra_directions_least_squares(rng):
    spec = LatticeSpec(3)
    f = rng.standard_normal((3, 3, 3))
    dirs = diverse_family(3, Family.Y, rng) + [Direction.y(0.9, -0.2), Direction.y(-0.45, 0.33)]
    rec = vandermonde_tomography(project_many(Object3D(spec, f), dirs), spec)
    assert np.allclose(rec.values, f, atol=1e-9)


def test_single_voxel():
    spec = LatticeSpec(1)
    obj = Object3D(spec, np.array([[[2.5]]]))
    rec = vandermonde_tomography([project(obj, Direction.z(0.3, 0.1))], spec)
    assert rec.values[0, 0, 0] == pytest.approx(2.5)


def test_zero_projections_give_zero(rng):
    spec = LatticeSpec(3)
    dirs = diverse_family(3, Family.Z, rng)
    rec = vandermonde_tomography(project_many(Object3D.zeros(spec), dirs), spec)
    assert np.all(rec.values == 0)


def test_too_few_directions(rng):
    spec = LatticeSpec(5)
    dirs = diverse_family(5, Family.X, rng)[:4]
    with pytest.raises(ValueError, match="at least"):
        vandermonde_tomography(project_many(Object3D.zeros(spec), dirs), spec)


def test_collision_refused():
    spec = LatticeSpec(3)
    dirs = [Direction.z(-0.6, -0.6), Direction.z(0.65, 0.65), Direction.z(0.1, 0.2)]
    with pytest.raises(DiversityError) as info:
        vandermonde_tomography(project_many(Object3D.zeros(spec), dirs), spec)
    assert not info.value.report.satisfied
