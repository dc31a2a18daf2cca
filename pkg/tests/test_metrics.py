import math

import numpy as np
import pytest

from difftomo.lattice import LatticeSpec, Object3D
from difftomo.recon import correlation, sector_bound, sector_bound_union


def test_correlation_basic(rng):
    spec = LatticeSpec(3)
    f = Object3D(spec, rng.standard_normal((3, 3, 3)) + 1j * rng.standard_normal((3, 3, 3)))
    assert correlation(f, f) == pytest.approx(1.0)
    assert correlation(f, Object3D(spec, np.exp(1.7j) * f.values)) == pytest.approx(1.0)


def test_correlation_orthogonal():
    spec = LatticeSpec(4, 7)
    x = np.arange(4)
    f = np.exp(2j * np.pi * x / 4)[:, None, None] * np.ones((4, 4, 4))
    g = np.ones((4, 4, 4))
    assert correlation(Object3D(spec, f), Object3D(spec, g)) < 1e-12


def test_correlation_zero_and_mismatch():
    spec = LatticeSpec(3)
    with pytest.warns(UserWarning):
        assert correlation(Object3D.zeros(spec), Object3D.delta(spec)) == 0.0
    with pytest.raises(ValueError):
        correlation(Object3D.zeros(spec), Object3D.zeros(LatticeSpec(3, 7)))


def test_sector_bound_half_plane():
    for S in (0, 5, 30):
        assert sector_bound(6, 0.0, math.pi, S) == max(0.0, 1 - 36 * 2.0 ** (-(S // 2)))
    assert sector_bound(4, 0, 1, 0) == 0.0
    with pytest.raises(ValueError):
        sector_bound(3, 0, 4, 2)


def test_union_bound_positive_at_designed_support():
    n, T = 36, 108
    S = 2 * math.ceil(2 * math.log2(n**2 * T))
    assert sector_bound_union(n, 0, math.pi, S, T) > 0
    assert sector_bound_union(n, 0, math.pi, 2, T) == 0.0
