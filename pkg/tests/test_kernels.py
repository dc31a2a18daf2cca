import numpy as np
import pytest

from difftomo import _kernels_py, kernels


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in kernels.backends()


@pytest.mark.parametrize("name", sorted(kernels.backends()))
def test_bjorck_pereyra_matches_dense(name, rng):
    impl = kernels.backends()[name]
    m = 6
    z = np.exp(1j * rng.uniform(0, 2 * np.pi, (4, m)))
    b = rng.standard_normal((4, m)) + 1j * rng.standard_normal((4, m))
    c = impl.bjorck_pereyra(z, b)
    for s in range(4):
        V = z[s][:, None] ** np.arange(m)
        assert np.allclose(V @ c[s], b[s], atol=1e-10)


@pytest.mark.parametrize("name", sorted(kernels.backends()))
def test_line_sums_backends_agree(name, rng):
    impl = kernels.backends()[name]
    g = rng.standard_normal((5, 5, 5)) + 1j * rng.standard_normal((5, 5, 5))
    ref = _kernels_py.dirichlet_line_sums(g, 0.3, -0.45, 9)
    out = impl.dirichlet_line_sums(g, 0.3, -0.45, 9)
    assert np.allclose(out, ref, atol=1e-12)


@pytest.mark.parametrize("name", sorted(kernels.backends()))
def test_line_sums_tiny_slope_matches_axis(name, rng):
    # slopes inside the series band of the kernel must reduce to plain sums
    impl = kernels.backends()[name]
    g = rng.standard_normal((3, 3, 3))
    out = impl.dirichlet_line_sums(g, 1e-13, -1e-300, 5)
    ref = impl.dirichlet_line_sums(g, 0.0, 0.0, 5)
    assert np.all(np.isfinite(out))
    assert np.allclose(out, ref, atol=1e-11)
