"""Compiled inner loops for the coherent span sum.

The sum S_N(x) = sum_{m=1}^{N} sinc(m x) exp(j m r x) is evaluated by
recurrences: sin(m x) through the Chebyshev three-term relation and
exp(j m r x) by repeated complex rotation. Samples are processed in
cache-sized blocks with the m-loop outermost so the per-sample updates
vectorise.
"""
import math

import numba
import numpy as np

_BLOCK = 256


@numba.njit(cache=True, fastmath=True)
def coherent_energy(x, w, r, N, lead):
    """Return (sum w |lead + S_N|^2, sum w (|lead + S_{N+1}|^2 - |lead + S_N|^2)).

    ``x`` are sample points, ``w`` the quadrature weights (any extra
    non-negative factor folded in), ``r`` the ratio of the phase rate to the
    sinc rate.
    """
    n = x.size
    inv_m = 1.0 / np.arange(1, N + 2)
    cx = np.empty(_BLOCK)
    sm = np.empty(_BLOCK)
    sm1 = np.empty(_BLOCK)
    zr = np.empty(_BLOCK)
    zi = np.empty(_BLOCK)
    er = np.empty(_BLOCK)
    ei = np.empty(_BLOCK)
    ar = np.empty(_BLOCK)
    ai = np.empty(_BLOCK)
    ix = np.empty(_BLOCK)
    energy = 0.0
    increment = 0.0
    for s in range(0, n, _BLOCK):
        nb = min(_BLOCK, n - s)
        for j in range(nb):
            xj = x[s + j]
            cx[j] = math.cos(xj)
            sm[j] = math.sin(xj)
            sm1[j] = 0.0
            zr[j] = math.cos(r * xj)
            zi[j] = math.sin(r * xj)
            er[j] = zr[j]
            ei[j] = zi[j]
            ar[j] = 0.0
            ai[j] = 0.0
            ix[j] = 1.0 / xj if xj != 0.0 else 0.0
        for m in range(N):
            im = inv_m[m]
            for j in range(nb):
                sc = sm[j] * ix[j] * im
                ar[j] += sc * er[j]
                ai[j] += sc * ei[j]
                sn = 2.0 * cx[j] * sm[j] - sm1[j]
                sm1[j] = sm[j]
                sm[j] = sn
                t = er[j] * zr[j] - ei[j] * zi[j]
                ei[j] = er[j] * zi[j] + ei[j] * zr[j]
                er[j] = t
        imn = inv_m[N]
        for j in range(nb):
            xj = x[s + j]
            if xj == 0.0:
                # sinc(0) = 1 and the phase is 1 for every term
                vr = lead + N
                vi = 0.0
                tr = 1.0
                ti = 0.0
            else:
                vr = lead + ar[j]
                vi = ai[j]
                sc = sm[j] * ix[j] * imn
                tr = sc * er[j]
                ti = sc * ei[j]
            e = vr * vr + vi * vi
            energy += w[s + j] * e
            increment += w[s + j] * (2.0 * (vr * tr + vi * ti) + tr * tr + ti * ti)
    return energy, increment


@numba.njit(cache=True)
def geometric_span_sum(theta, n):
    """sum_{m=0}^{n-1} exp(j m theta) in the stable half-angle form."""
    out = np.empty(theta.size, dtype=np.complex128)
    for j in range(theta.size):
        h = 0.5 * theta[j]
        k = round(h / math.pi)
        d = h - k * math.pi
        sign = 1.0 if (k * (n - 1)) % 2 == 0 else -1.0
        if abs(d) * n < 1e-4:
            # sin(n h)/sin(h) near a multiple of pi, second-order expansion
            amp = sign * n * (1.0 - (n * n - 1.0) * d * d / 6.0)
        else:
            amp = sign * math.sin(n * d) / math.sin(d)
        out[j] = amp * complex(math.cos((n - 1) * h), math.sin((n - 1) * h))
    return out


@numba.njit(cache=True, fastmath=True)
def apply_kerr_phase(field, coef):
    """field *= exp(j coef (|E_x|^2 + |E_y|^2)) for a (2, N) Manakov field, in place."""
    for j in range(field.shape[1]):
        a = field[0, j]
        b = field[1, j]
        p = a.real * a.real + a.imag * a.imag + b.real * b.real + b.imag * b.imag
        ph = coef * p
        rot = complex(math.cos(ph), math.sin(ph))
        field[0, j] = a * rot
        field[1, j] = b * rot


@numba.njit(cache=True, fastmath=True)
def apply_linear_step(spec, phase_rate, dz, log_amplitude):
    """spec *= exp(j phase_rate dz + log_amplitude) for a (2, N) spectrum, in place."""
    for j in range(spec.shape[1]):
        ph = phase_rate[j] * dz
        m = math.exp(log_amplitude[j])
        rot = complex(m * math.cos(ph), m * math.sin(ph))
        spec[0, j] *= rot
        spec[1, j] *= rot
