# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 kernel for the eight-neuron network.

The arithmetic here is kept in the same order as ``_pykernel`` so the two
backends agree to the last bit when the compiler does not fuse
multiply-adds.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sin, log, log10, isfinite

cnp.import_array()

cdef double EXP_CLAMP = 700.0
cdef double LOG_TENTH = log(0.1)


cdef inline double _envelope(double RP, double TP, double eR, double eF, double t0, double t) noexcept nogil:
    cdef double TR, TF, v
    if TP <= 0.0 or t < t0 or t > t0 + TP:
        return 1.0
    TR = eR * TP
    TF = eF * TP
    if t < t0 + TR:
        return 1.0 + (RP - 1.0) * log10(1.0 + 9.0 * (t - t0) / TR)
    if t <= t0 + TP - TF:
        return RP
    v = (t - (t0 + TP - TF)) / TF
    return 1.0 + (RP - 1.0) * (log(0.1 + 0.9 * v) / LOG_TENTH)


cdef void _deriv(const double* s, double t, const double* g, const double* gains,
                 const double* lam, const double* consts, const double* mult,
                 double drive_t0, double* out) noexcept nogil:
    cdef int i, j
    cdef double a, f, k1, k2, same, cross, cs, cc, fc, e
    cdef double b = consts[0]
    cdef double p = consts[1]
    cdef double q = consts[2]
    for i in range(8):
        same = 0.0
        cross = 0.0
        if i < 4:
            a = g[0]; f = g[1]; k1 = g[2]; k2 = g[3]
            cs = gains[0]; cc = gains[3]
            for j in range(4):
                same = same + lam[j * 8 + i] * s[j]
            for j in range(4, 8):
                cross = cross + lam[j * 8 + i] * s[j]
        else:
            a = g[4]; f = g[5]; k1 = g[6]; k2 = g[7]
            cs = gains[1]; cc = gains[2]
            for j in range(4, 8):
                same = same + lam[j * 8 + i] * s[j]
            for j in range(4):
                cross = cross + lam[j * 8 + i] * s[j]
        fc = mult[i] * f * (1.0 + k1 * sin(k2 * (t - drive_t0)) + cs * same + cc * cross)
        e = -fc - b * s[8 + i] + b * s[16 + i]
        if e > EXP_CLAMP:
            e = EXP_CLAMP
        elif e < -EXP_CLAMP:
            e = -EXP_CLAMP
        out[i] = a * (-s[i] + 1.0 / (1.0 + exp(e)))
        out[8 + i] = s[i] - p * s[8 + i]
        out[16 + i] = s[i] - q * s[16 + i]


cdef inline void _stage_mult(const double* mask, const double* env, double t, double* mult) noexcept nogil:
    cdef int i
    cdef double m = _envelope(env[0], env[1], env[2], env[3], env[4], t)
    for i in range(8):
        if mask[i] != 0.0:
            mult[i] = m
        else:
            mult[i] = 1.0


def envelope(double t, const double[::1] env):
    return _envelope(env[0], env[1], env[2], env[3], env[4], t)


def derivative(const double[::1] state, double t, const double[::1] params, const double[::1] gains,
               const double[:, ::1] lam, const double[::1] consts, const double[::1] mult, double drive_t0):
    out = np.empty(24)
    cdef double[::1] o = out
    _deriv(&state[0], t, &params[0], &gains[0], &lam[0, 0], &consts[0], &mult[0], drive_t0, &o[0])
    return out


def integrate(double[::1] state, long long n0, long long nsteps, double dt,
              const double[::1] params, const double[::1] gains, const double[:, ::1] lam,
              const double[::1] consts, const double[::1] mask, const double[::1] env, double drive_t0,
              const double[:, ::1] noise, long long rec_every, double[:, ::1] out, long long row0,
              bint use_wait, double wait_lo, double wait_hi, double x1_prev):
    """Advance ``state`` in place by up to ``nsteps`` RK4 steps.

    Returns ``(steps_taken, x1_prev, status)`` with status 0 for a full run,
    1 when the wait condition on F stopped the run early and 2 when a
    non-finite value appeared (``steps_taken`` then counts the failed step).
    """
    cdef double k1[24]
    cdef double k2[24]
    cdef double k3[24]
    cdef double k4[24]
    cdef double tmp[24]
    cdef double mult[8]
    cdef double* s = &state[0]
    cdef const double* g = &params[0]
    cdef const double* gn = &gains[0]
    cdef const double* lm = &lam[0, 0]
    cdef const double* cs = &consts[0]
    cdef const double* mk = &mask[0]
    cdef const double* ev = &env[0]
    cdef bint has_noise = noise.shape[0] > 0
    cdef double half = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef long long st, n, row
    cdef int i
    cdef double t, x1, F
    cdef int status = 0
    with nogil:
        for st in range(nsteps):
            n = n0 + st
            if use_wait:
                x1 = s[0]
                if x1 - x1_prev >= 0.0:
                    F = x1
                else:
                    F = 2.0 - x1
                if F >= wait_lo and F <= wait_hi:
                    status = 1
                    break
            t = n * dt
            x1_prev = s[0]
            _stage_mult(mk, ev, t, mult)
            _deriv(s, t, g, gn, lm, cs, mult, drive_t0, k1)
            for i in range(24):
                tmp[i] = s[i] + half * k1[i]
            _stage_mult(mk, ev, t + half, mult)
            _deriv(tmp, t + half, g, gn, lm, cs, mult, drive_t0, k2)
            for i in range(24):
                tmp[i] = s[i] + half * k2[i]
            _deriv(tmp, t + half, g, gn, lm, cs, mult, drive_t0, k3)
            for i in range(24):
                tmp[i] = s[i] + dt * k3[i]
            _stage_mult(mk, ev, t + dt, mult)
            _deriv(tmp, t + dt, g, gn, lm, cs, mult, drive_t0, k4)
            for i in range(24):
                s[i] = s[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if has_noise:
                for i in range(8):
                    s[i] = s[i] + noise[st, i]
            for i in range(24):
                if not isfinite(s[i]):
                    status = 2
            if status == 2:
                st = st + 1
                break
            if (n + 1) % rec_every == 0:
                row = (n + 1) // rec_every - row0
                if row >= 0 and row < out.shape[0]:
                    for i in range(24):
                        out[row, i] = s[i]
        else:
            st = nsteps
    return st, x1_prev, status
