import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from difftomo.lattice import (
    LatticeSpec,
    Object3D,
    centered_range,
    crop_wrapped,
    dirichlet_kernel,
    interpolate,
    pad_wrapped,
    read_volume,
    write_volume,
)


def test_centered_range():
    assert list(centered_range(5)) == [-2, -1, 0, 1, 2]
    assert list(centered_range(4)) == [-2, -1, 0, 1]


def test_spec_defaults_and_validation():
    s = LatticeSpec(7)
    assert (s.p, s.period) == (13, 2.0)
    assert LatticeSpec(16).p == 31
    with pytest.raises(ValueError):
        LatticeSpec(7, 14)
    with pytest.raises(ValueError):
        LatticeSpec(7, 11)
    with pytest.raises(ValueError):
        LatticeSpec(0)


def test_dirichlet_at_integers_is_kronecker():
    p = 13
    t = np.arange(-30, 31)
    d = dirichlet_kernel(t, p)
    assert np.array_equal(d, (t % p == 0).astype(float))


def test_dirichlet_matches_defining_sum(rng):
    p = 11
    t = rng.uniform(-20, 20, 50)
    k = centered_range(p)
    ref = np.exp(2j * np.pi * np.outer(t, k) / p).sum(axis=1).real / p
    assert np.allclose(dirichlet_kernel(t, p), ref, atol=1e-13)


@given(st.floats(-50, 50, allow_nan=False))
@settings(max_examples=100, deadline=None)
def test_dirichlet_periodic_and_even(t):
    p = 9
    assert math.isclose(dirichlet_kernel(t, p), dirichlet_kernel(t + p, p), abs_tol=1e-12)
    assert math.isclose(dirichlet_kernel(t, p), dirichlet_kernel(-t, p), abs_tol=1e-12)


def test_interpolate_reproduces_grid(rng):
    spec = LatticeSpec(5)
    obj = Object3D(spec, rng.standard_normal((5, 5, 5)))
    z = spec.zn
    x, y, w = np.meshgrid(z, z, z, indexing="ij")
    assert np.allclose(interpolate(obj, x, y, w), obj.values, atol=1e-14)
    # zero on the padding points
    assert abs(interpolate(obj, 3, 0, 0)) < 1e-14


def test_object_accessors(rng):
    spec = LatticeSpec(3)
    obj = Object3D.delta(spec, (1, -1, 0), 2.5)
    assert obj.at(1, -1, 0) == 2.5
    assert obj.at(5, 0, 0) == 0.0
    assert obj.values.flags.writeable is False
    with pytest.raises(ValueError):
        Object3D(spec, np.zeros((3, 3, 4)))
    s = obj + obj
    assert s.at(1, -1, 0) == 5.0
    assert (2 * obj).norm() == pytest.approx(5.0)


def test_pad_crop_round_trip(rng):
    v = rng.standard_normal((4, 5, 5))
    padded = pad_wrapped(v, 9, axes=(1, 2))
    assert padded.shape == (4, 9, 9)
    assert padded[:, 0, 0].tolist() == v[:, 2, 2].tolist()
    assert np.array_equal(crop_wrapped(padded, 5, axes=(1, 2)), v)


def test_volume_round_trip(tmp_path, rng):
    spec = LatticeSpec(3, 7)
    obj = Object3D(spec, rng.standard_normal((3, 3, 3)) + 1j * rng.standard_normal((3, 3, 3)))
    write_volume(tmp_path / "a.vol", obj)
    back = read_volume(tmp_path / "a.vol")
    assert back.spec.p == 7
    assert np.array_equal(back.values, obj.values)
    raw = (tmp_path / "a.vol").read_bytes()
    assert raw[:4] == b"VOL1" and len(raw) == 12 + 16 * 27
    (tmp_path / "b.vol").write_bytes(raw[:-1])
    with pytest.raises(ValueError):
        read_volume(tmp_path / "b.vol")


def test_dirichlet_examples():
    assert dirichlet_kernel(0.0, 9) == 1.0
    assert dirichlet_kernel(3.0, 9) == 0.0
    ref = np.exp(2j * np.pi * 0.5 * centered_range(9) / 9).sum().real / 9
    assert dirichlet_kernel(0.5, 9) == pytest.approx(ref, abs=1e-14)
    assert dirichlet_kernel(0.5, 9) == pytest.approx(0.64, abs=5e-4)


def test_interpolate_trig_sum_oracle(rng):
    spec = LatticeSpec(3, 5)
    f = rng.standard_normal((3, 3, 3)) + 1j * rng.standard_normal((3, 3, 3))
    x, y, z = 0.3, -0.7, 1.1
    k = centered_range(5)

    def d(t):
        return np.exp(2j * np.pi * t * k / 5).sum() / 5

    ref = sum(
        f[a, b, c] * d(x - i) * d(y - j) * d(z - w)
        for a, i in enumerate(spec.zn)
        for b, j in enumerate(spec.zn)
        for c, w in enumerate(spec.zn)
    )
    assert interpolate(Object3D(spec, f), x, y, z) == pytest.approx(ref, abs=1e-12)
    assert interpolate(Object3D.zeros(spec), x, y, z) == 0


def test_interpolate_periodic(rng):
    spec = LatticeSpec(3, 7)
    obj = Object3D(spec, rng.standard_normal((3, 3, 3)))
    pts = rng.uniform(-5, 5, (100, 3))
    shift = rng.integers(-2, 3, (100, 3)) * 7
    a = interpolate(obj, *pts.T)
    b = interpolate(obj, *(pts + shift).T)
    assert np.allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("t", [5e-324, 1e-300, -1e-12, 1e-7, 9 + 1e-9])
def test_dirichlet_near_peak_is_finite(t):
    d = dirichlet_kernel(t, 9)
    assert np.isfinite(d) and d == pytest.approx(1.0, abs=1e-12)
