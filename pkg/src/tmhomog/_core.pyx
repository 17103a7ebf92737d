# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loops for the time steppers."""

cimport cython


def leading_step(const double[::1] u, const double[::1] u_prev, double[::1] out,
                 double rho_minus, double rho_plus, double lam2_E):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t m
    cdef double inv = 1.0 / rho_plus
    out[0] = 0.0
    out[n - 1] = 0.0
    for m in range(1, n - 1):
        out[m] = u[m] + (rho_minus * (u[m] - u_prev[m])
                         + lam2_E * (u[m + 1] - 2.0 * u[m] + u[m - 1])) * inv


def second_order_rhs(const double[::1] u, const double[::1] u_prev, double[::1] out,
                     double A2, double B, double C):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t m
    cdef double c0 = 2.0 * (1.0 - A2 + 2.0 * B)
    cdef double c1 = A2 - 2.0 * B
    cdef double p0 = -(1.0 + 2.0 * B - C)
    cdef double p1 = B - 0.5 * C
    out[0] = 0.0
    out[n - 1] = 0.0
    for m in range(1, n - 1):
        out[m] = (c0 * u[m] + c1 * (u[m + 1] + u[m - 1])
                  + p0 * u_prev[m] + p1 * (u_prev[m + 1] + u_prev[m - 1]))


def thomas_const(double P, double Q, const double[::1] rhs, double[::1] out, double[::1] work):
    """Solve tridiag(Q, P, Q) x = rhs on the interior nodes; end values stay 0."""
    cdef Py_ssize_t n = rhs.shape[0]
    cdef Py_ssize_t m
    cdef double denom
    out[0] = 0.0
    out[n - 1] = 0.0
    if n < 3:
        return
    work[1] = Q / P
    out[1] = rhs[1] / P
    for m in range(2, n - 1):
        denom = P - Q * work[m - 1]
        work[m] = Q / denom
        out[m] = (rhs[m] - Q * out[m - 1]) / denom
    for m in range(n - 3, 0, -1):
        out[m] -= work[m] * out[m + 1]


def gather4(const double[::1] vals, const long[:, ::1] idx, const double[:, ::1] w, double[::1] out):
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = (w[i, 0] * vals[idx[i, 0]] + w[i, 1] * vals[idx[i, 1]]
                  + w[i, 2] * vals[idx[i, 2]] + w[i, 3] * vals[idx[i, 3]])
