"""Pure-Python RK4 kernel, used when the compiled extension is unavailable.

Same signatures and arithmetic order as ``_kernel.pyx``.
"""
import math

import numpy as np

EXP_CLAMP = 700.0
LOG_TENTH = math.log(0.1)


def _envelope(RP, TP, eR, eF, t0, t):
    if TP <= 0.0 or t < t0 or t > t0 + TP:
        return 1.0
    TR = eR * TP
    TF = eF * TP
    if t < t0 + TR:
        return 1.0 + (RP - 1.0) * math.log10(1.0 + 9.0 * (t - t0) / TR)
    if t <= t0 + TP - TF:
        return RP
    v = (t - (t0 + TP - TF)) / TF
    return 1.0 + (RP - 1.0) * (math.log(0.1 + 0.9 * v) / LOG_TENTH)


def _make_deriv(g, gains, lam, consts, drive_t0):
    """Build a closure specialised to fixed parameters.

    Per-neuron parameters and coupling weights are unpacked once; the
    summation order over ``j`` matches the compiled kernel.
    """
    b, p, q = consts
    sin = math.sin
    exp = math.exp
    rows = []
    for i in range(8):
        if i < 4:
            same_idx, cross_idx = range(4), range(4, 8)
            a, f, k1, k2 = g[0], g[1], g[2], g[3]
            cs, cc = gains[0], gains[3]
        else:
            same_idx, cross_idx = range(4, 8), range(4)
            a, f, k1, k2 = g[4], g[5], g[6], g[7]
            cs, cc = gains[1], gains[2]
        same_terms = [(lam[j][i], j) for j in same_idx]
        cross_terms = [(lam[j][i], j) for j in cross_idx]
        rows.append((i, a, f, k1, k2, cs, cc, same_terms, cross_terms))

    def deriv(s, t, mult):
        out = [0.0] * 24
        for i, a, f, k1, k2, cs, cc, same_terms, cross_terms in rows:
            same = 0.0
            for w, j in same_terms:
                same = same + w * s[j]
            cross = 0.0
            for w, j in cross_terms:
                cross = cross + w * s[j]
            fc = mult[i] * f * (1.0 + k1 * sin(k2 * (t - drive_t0)) + cs * same + cc * cross)
            e = -fc - b * s[8 + i] + b * s[16 + i]
            if e > EXP_CLAMP:
                e = EXP_CLAMP
            elif e < -EXP_CLAMP:
                e = -EXP_CLAMP
            xi = s[i]
            out[i] = a * (-xi + 1.0 / (1.0 + exp(e)))
            out[8 + i] = xi - p * s[8 + i]
            out[16 + i] = xi - q * s[16 + i]
        return out

    return deriv


def envelope(t, env):
    return _envelope(env[0], env[1], env[2], env[3], env[4], t)


def derivative(state, t, params, gains, lam, consts, mult, drive_t0):
    deriv = _make_deriv(
        [float(v) for v in params],
        [float(v) for v in gains],
        np.asarray(lam, dtype=float).tolist(),
        [float(v) for v in consts],
        float(drive_t0),
    )
    return np.array(deriv([float(v) for v in state], float(t), [float(v) for v in mult]))


def integrate(state, n0, nsteps, dt, params, gains, lam, consts, mask, env, drive_t0,
              noise, rec_every, out, row0, use_wait, wait_lo, wait_hi, x1_prev):
    """See ``_kernel.integrate``."""
    deriv = _make_deriv(
        [float(v) for v in params],
        [float(v) for v in gains],
        np.asarray(lam, dtype=float).tolist(),
        [float(v) for v in consts],
        float(drive_t0),
    )
    mk = [float(v) != 0.0 for v in mask]
    RP, TP, eR, eF, et0 = (float(v) for v in env)
    has_env = TP > 0.0 and any(mk)
    ones = [1.0] * 8

    def stage_mult(t):
        if not has_env:
            return ones
        m = _envelope(RP, TP, eR, eF, et0, t)
        return [m if mk[i] else 1.0 for i in range(8)]

    s = [float(v) for v in state]
    noise_rows = noise.tolist() if noise.shape[0] > 0 else None
    nrows = out.shape[0]
    half = 0.5 * dt
    sixth = dt / 6.0
    rng24 = range(24)
    isfinite = math.isfinite
    status = 0
    st = 0
    while st < nsteps:
        n = n0 + st
        if use_wait:
            x1 = s[0]
            F = x1 if x1 - x1_prev >= 0.0 else 2.0 - x1
            if F >= wait_lo and F <= wait_hi:
                status = 1
                break
        t = n * dt
        x1_prev = s[0]
        m0 = stage_mult(t)
        k1 = deriv(s, t, m0)
        tmp = [s[i] + half * k1[i] for i in rng24]
        mh = stage_mult(t + half)
        k2 = deriv(tmp, t + half, mh)
        tmp = [s[i] + half * k2[i] for i in rng24]
        k3 = deriv(tmp, t + half, mh)
        tmp = [s[i] + dt * k3[i] for i in rng24]
        k4 = deriv(tmp, t + dt, stage_mult(t + dt))
        s = [s[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in rng24]
        if noise_rows is not None:
            nr = noise_rows[st]
            for i in range(8):
                s[i] = s[i] + nr[i]
        st += 1
        if not all(isfinite(v) for v in s):
            status = 2
            break
        if (n + 1) % rec_every == 0:
            row = (n + 1) // rec_every - row0
            if 0 <= row < nrows:
                out[row, :] = s
    state[:] = s
    return st, x1_prev, status
