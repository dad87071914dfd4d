# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for jet products and compensated quadrature sums.

Both kernels must agree bit-for-bit with ``_fallback``: accumulation order
is the same and the extension is built with ``-ffp-contract=off``.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def jet_mul(const double[:, ::1] a, const double[:, ::1] b,
            const cnp.intp_t[::1] ti, const cnp.intp_t[::1] tj,
            const cnp.intp_t[::1] tk, Py_ssize_t ncoef):
    """Truncated Taylor product; pairs are applied in table order."""
    cdef Py_ssize_t npts = a.shape[1]
    cdef Py_ssize_t npairs = ti.shape[0]
    out = np.zeros((ncoef, npts), dtype=np.float64)
    cdef double[:, ::1] c = out
    cdef Py_ssize_t q, p, i, j, k
    with nogil:
        for q in range(npairs):
            i = ti[q]
            j = tj[q]
            k = tk[q]
            for p in range(npts):
                c[k, p] = c[k, p] + a[i, p] * b[j, p]
    return out


def neumaier_dot(const double[::1] w, const double[::1] g, double s, double comp):
    """Continue a Neumaier sum of w[i]*g[i]; returns the updated (sum, comp)."""
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t i
    cdef double v, t
    with nogil:
        for i in range(n):
            v = w[i] * g[i]
            t = s + v
            if (s if s >= 0 else -s) >= (v if v >= 0 else -v):
                comp = comp + ((s - t) + v)
            else:
                comp = comp + ((v - t) + s)
            s = t
    return s, comp
