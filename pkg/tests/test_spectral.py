import itertools
from fractions import Fraction

import numpy as np
import pytest

from difftomo.lattice import LatticeSpec, Object3D
from difftomo.projector import Direction, Family, project
from difftomo.spectral import (
    CommonLinePair,
    dft2,
    dft3,
    fourier_slice,
    slice_image,
    verify_slice_theorem,
)


def brute_dft3(obj, xi, eta, zeta):
    spec = obj.spec
    z = spec.zn
    total = 0j
    for (a, i), (b, j), (c, k) in itertools.product(enumerate(z), repeat=3):
        total += obj.values[a, b, c] * np.exp(-2j * np.pi * (xi * i + eta * j + zeta * k) / spec.p)
    return total


def test_dft3_matches_triple_loop(rng):
    spec = LatticeSpec(3)
    obj = Object3D(spec, rng.standard_normal((3, 3, 3)) + 1j * rng.standard_normal((3, 3, 3)))
    F = dft3(obj)
    for xi, eta, zeta in [(0, 0, 0), (1, -2, 2), (-1, 0, 1), (2, 2, -2)]:
        assert F.at(xi, eta, zeta) == pytest.approx(brute_dft3(obj, xi, eta, zeta), abs=1e-12)


def test_dft3_trivial_cases():
    spec = LatticeSpec(3)
    assert np.allclose(dft3(Object3D.delta(spec)).values, 1.0)
    const = Object3D(spec, np.full((3, 3, 3), 2.0))
    assert dft3(const).at(0, 0, 0) == pytest.approx(2.0 * 27)


def test_dft2_brute_force(rng):
    spec = LatticeSpec(3)
    proj = project(Object3D(spec, rng.standard_normal((3, 3, 3))), Direction.x(0.2, -0.6))
    F = dft2(proj)
    p = spec.p
    for k1, k2 in [(0, 0), (1, 2), (-2, 1)]:
        ref = sum(
            proj.values[c1 % p, c2 % p] * np.exp(-2j * np.pi * (k1 * c1 + k2 * c2) / p)
            for c1 in spec.zp
            for c2 in spec.zp
        )
        assert F[k1 % p, k2 % p] == pytest.approx(ref, abs=1e-12)


def test_fourier_slice_examples(rng):
    spec = LatticeSpec(5)
    obj = Object3D(spec, rng.standard_normal((5, 5, 5)))
    F = dft3(obj)
    d = Direction.z(0.3, 0.4)
    assert fourier_slice(F, d, (0, 0)) == pytest.approx(F.at(0, 0, 0), abs=1e-10)
    assert fourier_slice(F, Direction.z(), (2, -1)) == pytest.approx(F.at(2, -1, 0), abs=1e-12)
    img = dft2(project(obj, d))
    assert fourier_slice(F, d, (2, 1)) == pytest.approx(img[2, 1], abs=1e-10)


def test_slice_theorem_random(rng):
    spec = LatticeSpec(5)
    for _ in range(10):
        obj = Object3D(spec, rng.standard_normal((5, 5, 5)) + 1j * rng.standard_normal((5, 5, 5)))
        d = Direction(Family(int(rng.integers(3))), *rng.uniform(-1, 1, 2))
        assert verify_slice_theorem(obj, d) < 1e-9
        assert np.allclose(slice_image(dft3(obj), d), dft2(project(obj, d)), atol=1e-9)
    assert verify_slice_theorem(Object3D.zeros(spec), Direction.y(0.1, 0.2)) == 0.0
    assert verify_slice_theorem(Object3D(spec, rng.standard_normal((5, 5, 5))), Direction.x()) < 1e-10


def test_common_lines_axis_example():
    from difftomo.spectral import common_line_points

    spec = LatticeSpec(3)
    pairs = common_line_points(Direction.z(Fraction(0), Fraction(0)), Direction.z(Fraction(1, 2), Fraction(0)), spec)
    expect = {CommonLinePair((0, e), (0, e)) for e in range(-2, 3)}
    assert set(pairs) == expect


def test_common_lines_generic_only_origin():
    from difftomo.spectral import common_line_points

    spec = LatticeSpec(5)
    t = Direction.z(np.sqrt(2) - 1, np.pi - 3)
    tp = Direction.x(np.e - 2.5, np.sqrt(3) - 1.5)
    assert common_line_points(t, tp, spec) == [CommonLinePair((0, 0), (0, 0))]
    with pytest.raises(ValueError):
        common_line_points(t, t, spec)


def test_common_line_values_agree(rng):
    from difftomo.spectral import common_line_points

    spec = LatticeSpec(3)
    obj = Object3D(spec, rng.standard_normal((3, 3, 3)))
    t, tp = Direction.z(Fraction(0), Fraction(0)), Direction.z(Fraction(1, 2), Fraction(0))
    a, b = dft2(project(obj, t)), dft2(project(obj, tp))
    p = spec.p
    for pair in common_line_points(t, tp, spec):
        assert a[pair.k[0] % p, pair.k[1] % p] == pytest.approx(b[pair.k_prime[0] % p, pair.k_prime[1] % p], abs=1e-10)
