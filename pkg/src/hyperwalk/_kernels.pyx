# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the single-cycle master equation.

The right-hand side is evaluated as the nearest-neighbour stencil on the
N x N density matrix (O(N^2) per call) rather than as a dense N^2 x N^2
matrix-vector product, and the adaptive Dormand-Prince loop runs without
returning to the interpreter between steps.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, fmax, fmin, pow
from libc.string cimport memcpy

from hyperwalk.core import NumericError

cnp.import_array()

ctypedef double complex cplx


cdef inline void _rhs(const cplx* rho, cplx* out, Py_ssize_t N, double gamma) noexcept nogil:
    cdef Py_ssize_t a, b, ap, am, bp, bm
    cdef cplx s
    cdef cplx iq = 0.25j
    for a in range(N):
        ap = a + 1 if a + 1 < N else 0
        am = a - 1 if a > 0 else N - 1
        for b in range(N):
            bp = b + 1 if b + 1 < N else 0
            bm = b - 1 if b > 0 else N - 1
            s = iq * (rho[a * N + bp] - rho[ap * N + b] - rho[am * N + b] + rho[a * N + bm])
            if a != b:
                s = s - gamma * rho[a * N + b]
            out[a * N + b] = s


def master_rhs(const cplx[:, ::1] rho, double gamma, cplx[:, ::1] out=None):
    """Time derivative of ``rho`` under the decoherent cycle walk."""
    cdef Py_ssize_t N = rho.shape[0]
    if rho.shape[1] != N:
        raise ValueError("rho must be square")
    if out is None:
        out = np.empty((N, N), dtype=np.complex128)
    elif out.shape[0] != N or out.shape[1] != N:
        raise ValueError("out has the wrong shape")
    with nogil:
        _rhs(&rho[0, 0], &out[0, 0], N, gamma)
    return np.asarray(out)


# Dormand-Prince 5(4) tableau
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0


cdef double _err_norm(const cplx* y, const cplx* ynew, cplx* k1, cplx* k3, cplx* k4,
                      cplx* k5, cplx* k6, cplx* k7, Py_ssize_t m, double h,
                      double rtol, double atol) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0, sc, r
    cdef cplx e
    for i in range(m):
        e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        sc = atol + rtol * fmax(abs(y[i]), abs(ynew[i]))
        r = abs(e) / sc
        acc += r * r
    return sqrt(acc / m)


def dopri5(const cplx[:, ::1] rho0, double gamma, const double[::1] times,
           double rtol=1e-9, double atol=1e-12, long max_steps=10_000_000):
    """Integrate the master equation and return the states at ``times``.

    Returns
    -------
    states : ndarray, shape (len(times), N, N)
    nsteps : int
        Accepted steps.
    """
    cdef Py_ssize_t N = rho0.shape[0]
    cdef Py_ssize_t m = N * N
    cdef Py_ssize_t T = times.shape[0]
    cdef Py_ssize_t i, it = 0
    cdef long steps = 0, rejected = 0
    cdef double t = times[0], h, h_try, err, factor, t_end, d0, d1, d2, h0, h1
    cdef bint last, accepted
    out = np.empty((T, N, N), dtype=np.complex128)
    cdef cplx[:, :, ::1] outv = out
    buf = np.zeros((9, m), dtype=np.complex128)
    cdef cplx[:, ::1] w = buf
    cdef cplx* y = &w[0, 0]
    cdef cplx* yn = &w[1, 0]
    cdef cplx* k1 = &w[2, 0]
    cdef cplx* k2 = &w[3, 0]
    cdef cplx* k3 = &w[4, 0]
    cdef cplx* k4 = &w[5, 0]
    cdef cplx* k5 = &w[6, 0]
    cdef cplx* k6 = &w[7, 0]
    cdef cplx* k7 = &w[8, 0]
    tmp = np.empty(m, dtype=np.complex128)
    cdef cplx[::1] tmpv = tmp
    cdef cplx* yt = &tmpv[0]

    memcpy(y, &rho0[0, 0], m * sizeof(cplx))
    while it < T and times[it] <= t:
        memcpy(&outv[it, 0, 0], y, m * sizeof(cplx))
        it += 1
    if it == T:
        return out, 0

    t_end = times[T - 1]
    with nogil:
        _rhs(y, k1, N, gamma)
        # Hairer & Wanner initial step heuristic
        d0 = 0.0
        d1 = 0.0
        for i in range(m):
            d0 += (abs(y[i]) / (atol + rtol * abs(y[i]))) ** 2
            d1 += (abs(k1[i]) / (atol + rtol * abs(y[i]))) ** 2
        d0 = sqrt(d0 / m)
        d1 = sqrt(d1 / m)
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h0 = fmin(h0, t_end - t)
        for i in range(m):
            yt[i] = y[i] + h0 * k1[i]
        _rhs(yt, k2, N, gamma)
        d2 = 0.0
        for i in range(m):
            d2 += (abs(k2[i] - k1[i]) / (atol + rtol * abs(y[i]))) ** 2
        d2 = sqrt(d2 / m) / h0
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = fmax(1e-6, h0 * 1e-3)
        else:
            h1 = pow(0.01 / fmax(d1, d2), 0.2)
        h = fmin(100 * h0, h1)

        while it < T:
            if steps + rejected > max_steps:
                break
            h_try = h
            last = False
            if t + h_try >= times[it]:
                h_try = times[it] - t
                last = True
            if h_try < 10.0 * 2.220446049250313e-16 * fabs(t) or h_try <= 0.0:
                break
            accepted = False
            while not accepted:
                for i in range(m):
                    yt[i] = y[i] + h_try * A21 * k1[i]
                _rhs(yt, k2, N, gamma)
                for i in range(m):
                    yt[i] = y[i] + h_try * (A31 * k1[i] + A32 * k2[i])
                _rhs(yt, k3, N, gamma)
                for i in range(m):
                    yt[i] = y[i] + h_try * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
                _rhs(yt, k4, N, gamma)
                for i in range(m):
                    yt[i] = y[i] + h_try * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
                _rhs(yt, k5, N, gamma)
                for i in range(m):
                    yt[i] = y[i] + h_try * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                            + A64 * k4[i] + A65 * k5[i])
                _rhs(yt, k6, N, gamma)
                for i in range(m):
                    yn[i] = y[i] + h_try * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                                            + B5 * k5[i] + B6 * k6[i])
                _rhs(yn, k7, N, gamma)
                err = _err_norm(y, yn, k1, k3, k4, k5, k6, k7, m, h_try, rtol, atol)
                if err <= 1.0:
                    accepted = True
                    if err == 0.0:
                        factor = MAX_FACTOR
                    else:
                        factor = fmin(MAX_FACTOR, SAFETY * pow(err, -0.2))
                    if last:
                        # a clipped step says nothing about the natural step size
                        h = fmax(h, h_try * factor) if h_try < h else h_try * factor
                    else:
                        h = h_try * factor
                else:
                    rejected += 1
                    h_try = h_try * fmax(MIN_FACTOR, SAFETY * pow(err, -0.2))
                    last = False
                    h = h_try
                    if h_try < 10.0 * 2.220446049250313e-16 * fabs(t):
                        break
            if not accepted:
                break
            steps += 1
            t = times[it] if last else t + h_try
            memcpy(y, yn, m * sizeof(cplx))
            memcpy(k1, k7, m * sizeof(cplx))
            while it < T and times[it] <= t:
                memcpy(&outv[it, 0, 0], y, m * sizeof(cplx))
                it += 1

    if it < T:
        raise NumericError(
            f"dopri5 stopped at t={t:.6g} before reaching t={times[it]:.6g} "
            f"(accepted={steps}, rejected={rejected}, last h={h:.3g}): step size underflow or step budget"
        )
    return out, steps
