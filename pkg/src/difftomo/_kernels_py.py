"""Pure numpy versions of the hot kernels (fallback for ``_kernels.pyx``)."""
import numpy as np


def bjorck_pereyra(z, b):
    """Solve ``sum_k c[s, k] * z[s, i]**k = b[s, i]`` for a batch of systems.

    Björck–Pereyra elimination: Newton divided differences followed by the
    conversion of the Newton form to monomial coefficients.  ``z`` and ``b``
    have shape ``(batch, m)``; nodes must be pairwise distinct per row.
    """
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    c = np.array(np.atleast_2d(b), dtype=complex)
    m = z.shape[1]
    for k in range(m - 1):
        c[:, k + 1:] = (c[:, k + 1:] - c[:, k:m - 1]) / (z[:, k + 1:] - z[:, :m - k - 1])
    for k in range(m - 2, -1, -1):
        c[:, k:m - 1] -= z[:, k:k + 1] * c[:, k + 1:]
    return c


def _dirichlet(t, p):
    r = t - p * np.round(t / p)
    k = np.round(r)
    num = np.where(np.mod(k, 2) == 0, 1.0, -1.0) * np.sin(np.pi * (r - k))
    den = p * np.sin(np.pi * r / p)
    small = np.abs(r) < 1e-6
    series = 1.0 - (np.pi * r) ** 2 * (p * p - 1) / (6.0 * p * p)
    return np.where(small, series, num / np.where(small, 1.0, den))


def dirichlet_line_sums(g, alpha, beta, p):
    """Line sums ``sum_i g~(i, alpha*i + c1, beta*i + c2)`` evaluated directly.

    ``g`` is a canonical ``(n, n, n)`` array whose first axis is the summation
    axis.  Returns a ``(p, p)`` complex image in wrapped order.
    """
    g = np.asarray(g, dtype=complex)
    n = g.shape[0]
    zn = np.arange(-(n // 2), n - n // 2)
    zp = np.arange(-(p // 2), p - p // 2)
    ay = _dirichlet(alpha * zn[:, None, None] + zp[None, :, None] - zn[None, None, :], p)
    az = _dirichlet(beta * zn[:, None, None] + zp[None, :, None] - zn[None, None, :], p)
    img = np.einsum("ica,idb,iab->cd", ay, az, g)
    out = np.empty((p, p), dtype=complex)
    w = np.mod(zp, p)
    out[np.ix_(w, w)] = img
    return out
