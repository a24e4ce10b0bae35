# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled coordinate-descent kernel (see ``_pykernels`` for the reference)."""

from libc.math cimport fabs


def layer_pass(const double[:, ::1] WT, double[:, ::1] z, const double[:, ::1] a,
               const double[:, ::1] z_next, double[:, ::1] a_next,
               int kind, double gamma, const double[::1] colsq):
    cdef Py_ssize_t n_samples = z.shape[0]
    cdef Py_ssize_t n_k = WT.shape[0]
    cdef Py_ssize_t n_next = WT.shape[1]
    cdef Py_ssize_t s, j, i
    cdef double dot, new, d, max_change = 0.0
    if z.shape[1] != n_k or z_next.shape[1] != n_next:
        raise ValueError("kernel shape mismatch")
    with nogil:
        for s in range(n_samples):
            for j in range(n_k):
                dot = 0.0
                for i in range(n_next):
                    dot = dot + WT[j, i] * (z_next[s, i] - a_next[s, i])
                new = (a[s, j] + gamma * (dot + colsq[j] * z[s, j])) / (1.0 + gamma * colsq[j])
                if kind == 1:
                    if new < 0.0:
                        new = 0.0
                elif kind == 2:
                    if new < 0.0:
                        new = 0.0
                    elif new > 1.0:
                        new = 1.0
                d = new - z[s, j]
                if d != 0.0:
                    z[s, j] = new
                    for i in range(n_next):
                        a_next[s, i] = a_next[s, i] + d * WT[j, i]
                    if fabs(d) > max_change:
                        max_change = fabs(d)
    return max_change
