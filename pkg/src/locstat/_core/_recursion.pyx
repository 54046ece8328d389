# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled scalar state recursion: the package's hot inner loop."""

BACKEND = "compiled"


def scan_segment(double[::1] phi, double[:, ::1] eta_t, double[::1] x):
    """Advance states ``x`` (shape (R,)) through one segment, in place.

    X <- phi[j] * X + eta_t[j, r] sequentially over steps j, per replication
    r. Noise is step-major (shape (m, R)), so each step is one contiguous
    fused multiply-add sweep over the replication vector.
    """
    cdef Py_ssize_t m = phi.shape[0]
    cdef Py_ssize_t R = eta_t.shape[1]
    cdef Py_ssize_t j, r
    cdef double p
    if x.shape[0] != R:
        raise ValueError("eta_t and x disagree on replication count")
    with nogil:
        for j in range(m):
            p = phi[j]
            for r in range(R):
                x[r] = p * x[r] + eta_t[j, r]
