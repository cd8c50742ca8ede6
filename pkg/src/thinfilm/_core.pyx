# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled flux-divergence kernel for the explicit thin-film step."""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, sqrt, floor

cnp.import_array()


cdef inline double _power(double m, double n, int mode, int k) noexcept nogil:
    # mode 0: general pow; 1: integer k; 2: k + 1/2
    cdef double r = 1.0
    cdef int e
    if mode == 0:
        return pow(m, n)
    for e in range(k):
        r = r * m
    if mode == 2:
        r = r * sqrt(m)
    return r


cdef inline double _mob(double a, double b, double n, double eps, int mode, int k) noexcept nogil:
    cdef double m = 0.5 * (a + b)
    if m < eps:
        m = eps
    if m < 0.0:
        m = 0.0
    return _power(m, n, mode, k)


def tendency(u, double h, double n, double eps_floor):
    """Return ``(-div(M grad lap u), max face mobility)`` on a periodic (ny, nx) grid."""
    cdef Py_ssize_t ny = u.shape[0], nx = u.shape[1]
    cdef Py_ssize_t i, j, ip, im, jp, jm
    cdef const double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] lap = np.empty((ny, nx))
    cdef double[:, ::1] fx = np.empty((ny, nx))
    cdef double[:, ::1] fy = np.empty((ny, nx))
    out = np.empty((ny, nx))
    cdef double[:, ::1] rhs = out
    cdef double hh = h * h
    cdef double mmax = 0.0, m, c
    cdef int mode = 0, k = 0
    if n == floor(n) and 0 < n <= 8:
        mode, k = 1, <int>n
    elif 2 * n == floor(2 * n) and 0 < n <= 8:
        mode, k = 2, <int>floor(n)

    with nogil:
        if ny == 1:
            for i in range(nx):
                ip = i + 1 if i + 1 < nx else 0
                im = i - 1 if i > 0 else nx - 1
                lap[0, i] = (uu[0, ip] - 2.0 * uu[0, i] + uu[0, im]) / hh
            for i in range(nx):
                ip = i + 1 if i + 1 < nx else 0
                m = _mob(uu[0, i], uu[0, ip], n, eps_floor, mode, k)
                if m > mmax:
                    mmax = m
                fx[0, i] = m * (lap[0, ip] - lap[0, i]) / h
            for i in range(nx):
                im = i - 1 if i > 0 else nx - 1
                rhs[0, i] = -((fx[0, i] - fx[0, im]) / h)
        else:
            for j in range(ny):
                jp = j + 1 if j + 1 < ny else 0
                jm = j - 1 if j > 0 else ny - 1
                for i in range(nx):
                    ip = i + 1 if i + 1 < nx else 0
                    im = i - 1 if i > 0 else nx - 1
                    c = (uu[j, ip] - 2.0 * uu[j, i] + uu[j, im]) + (uu[jp, i] - 2.0 * uu[j, i] + uu[jm, i])
                    lap[j, i] = c / hh
            for j in range(ny):
                jp = j + 1 if j + 1 < ny else 0
                for i in range(nx):
                    ip = i + 1 if i + 1 < nx else 0
                    m = _mob(uu[j, i], uu[j, ip], n, eps_floor, mode, k)
                    if m > mmax:
                        mmax = m
                    fx[j, i] = m * (lap[j, ip] - lap[j, i]) / h
                    m = _mob(uu[j, i], uu[jp, i], n, eps_floor, mode, k)
                    if m > mmax:
                        mmax = m
                    fy[j, i] = m * (lap[jp, i] - lap[j, i]) / h
            for j in range(ny):
                jm = j - 1 if j > 0 else ny - 1
                for i in range(nx):
                    im = i - 1 if i > 0 else nx - 1
                    rhs[j, i] = -((fx[j, i] - fx[j, im]) / h + (fy[j, i] - fy[jm, i]) / h)
    return out, mmax
