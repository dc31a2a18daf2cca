# cython: language_level=3
"""Compiled hot kernels.  Signatures mirror ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, fabs, M_PI, round as cround, fmod

cnp.import_array()


def bjorck_pereyra(z, b):
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] zz = np.ascontiguousarray(np.atleast_2d(z), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] c = np.array(np.atleast_2d(b), dtype=np.complex128, order="C")
    cdef Py_ssize_t batch = zz.shape[0]
    cdef Py_ssize_t m = zz.shape[1]
    cdef Py_ssize_t s, k, i
    cdef double complex[:, ::1] zv = zz
    cdef double complex[:, ::1] cv = c
    for s in range(batch):
        for k in range(m - 1):
            i = m - 1
            while i > k:
                cv[s, i] = (cv[s, i] - cv[s, i - 1]) / (zv[s, i] - zv[s, i - k - 1])
                i -= 1
        k = m - 2
        while k >= 0:
            for i in range(k, m - 1):
                cv[s, i] = cv[s, i] - zv[s, k] * cv[s, i + 1]
            k -= 1
    return c


cdef inline double _dirichlet(double t, int p) nogil:
    cdef double r = t - p * cround(t / p)
    cdef double k, num
    if fabs(r) < 1e-6:
        return 1.0 - (M_PI * r) * (M_PI * r) * (p * p - 1.0) / (6.0 * p * p)
    k = cround(r)
    num = sin(M_PI * (r - k))
    if fmod(k, 2.0) != 0.0:
        num = -num
    return num / (p * sin(M_PI * r / p))


def dirichlet_line_sums(g, double alpha, double beta, int p):
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] gg = np.ascontiguousarray(g, dtype=np.complex128)
    cdef double complex[:, :, ::1] gv = gg
    cdef int n = gg.shape[0]
    cdef int h = n // 2
    cdef int hp = p // 2
    out = np.empty((p, p), dtype=np.complex128)
    cdef double complex[:, ::1] ov = out
    # kernel tables, computed once: ay[i, c1, a] and az[i, c2, b]
    cdef double[:, :, ::1] ay = np.empty((n, p, n))
    cdef double[:, :, ::1] az = np.empty((n, p, n))
    # t[i, c1, b] = sum_a ay[i, c1, a] g[i, a, b]
    cdef double complex[:, :, ::1] t = np.zeros((n, p, n), dtype=np.complex128)
    cdef int ic1, ic2, i, a, bb
    cdef double w
    cdef double complex acc
    for i in range(n):
        for ic1 in range(p):
            for a in range(n):
                ay[i, ic1, a] = _dirichlet(alpha * (i - h) + (ic1 - hp) - (a - h), p)
                az[i, ic1, a] = _dirichlet(beta * (i - h) + (ic1 - hp) - (a - h), p)
    for i in range(n):
        for ic1 in range(p):
            for a in range(n):
                w = ay[i, ic1, a]
                if w == 0.0:
                    continue
                for bb in range(n):
                    t[i, ic1, bb] = t[i, ic1, bb] + w * gv[i, a, bb]
    for ic1 in range(p):
        for ic2 in range(p):
            acc = 0
            for i in range(n):
                for bb in range(n):
                    acc = acc + t[i, ic1, bb] * az[i, ic2, bb]
            ov[(ic1 - hp + p) % p, (ic2 - hp + p) % p] = acc
    return out
