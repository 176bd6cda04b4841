"""Numba kernels for the explicit Euler schemes.

Hot loops only; orchestration lives in pde_solver and travelling_wave.  The
loops are serial on purpose: bitwise reproducibility of a run is part of the
interface, and chunked serial stepping is fast enough at the window sizes
used.  Clamping happens inside the update loop (NaN fails both clamp
comparisons, so bad values survive to the post-chunk finiteness scan rather
than being silently repaired).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def scalar_chunk(u, dt, dx, n_steps):
    """Advance u_t = u_xx/2 + u(1-u) by n_steps in place; Dirichlet ends.

    Returns the number of clamp events (values pushed back into [0,1]).
    """
    n = u.shape[0]
    r = 0.5 * dt / (dx * dx)
    a = u.copy()
    b = np.empty_like(u)
    clamps = 0
    for m in range(n_steps):
        if m % 2 == 0:
            src, dst = a, b
        else:
            src, dst = b, a
        for i in range(1, n - 1):
            x = src[i] + r * (src[i - 1] - 2.0 * src[i] + src[i + 1]) \
                + dt * src[i] * (1.0 - src[i])
            if x < 0.0:
                x = 0.0
                clamps += 1
            elif x > 1.0:
                x = 1.0
                clamps += 1
            dst[i] = x
        dst[0] = src[0]
        dst[n - 1] = src[n - 1]
    final = a if n_steps % 2 == 0 else b
    for i in range(n):
        u[i] = final[i]
    return clamps


@njit(cache=True)
def coupled_chunk(v, w, gamma_t, beta_t, w_cap, dt, dx, n_steps, freeze_v):
    """Advance the coupled system by n_steps in place; Dirichlet ends.

    v_t = v_xx/2 + v(1-v)
    w_t = w_xx/2 + (1 - beta_t - (1-gamma_t) v - gamma_t w) w

    freeze_v != 0 skips the v update (established-background baseline).
    Returns the number of clamp events across both fields.
    """
    n = v.shape[0]
    r = 0.5 * dt / (dx * dx)
    av = v.copy()
    aw = w.copy()
    bv = np.empty_like(v)
    bw = np.empty_like(w)
    clamps = 0
    for m in range(n_steps):
        if m % 2 == 0:
            sv, sw, dv, dw = av, aw, bv, bw
        else:
            sv, sw, dv, dw = bv, bw, av, aw
        for i in range(1, n - 1):
            if freeze_v:
                vv = sv[i]
            else:
                vv = sv[i] + r * (sv[i - 1] - 2.0 * sv[i] + sv[i + 1]) \
                    + dt * sv[i] * (1.0 - sv[i])
                if vv < 0.0:
                    vv = 0.0
                    clamps += 1
                elif vv > 1.0:
                    vv = 1.0
                    clamps += 1
            ww = sw[i] + r * (sw[i - 1] - 2.0 * sw[i] + sw[i + 1]) \
                + dt * (1.0 - beta_t - (1.0 - gamma_t) * sv[i] - gamma_t * sw[i]) * sw[i]
            if ww < 0.0:
                ww = 0.0
                clamps += 1
            elif ww > w_cap:
                ww = w_cap
                clamps += 1
            dv[i] = vv
            dw[i] = ww
        dv[0] = sv[0]
        dw[0] = sw[0]
        dv[n - 1] = sv[n - 1]
        dw[n - 1] = sw[n - 1]
    if n_steps % 2 == 0:
        fv, fw = av, aw
    else:
        fv, fw = bv, bw
    for i in range(n):
        v[i] = fv[i]
        w[i] = fw[i]
    return clamps


@njit(cache=True)
def first_nonfinite(v, w):
    """Index of the first non-finite entry in either field, or -1."""
    for i in range(v.shape[0]):
        if not (np.isfinite(v[i]) and np.isfinite(w[i])):
            return i
    return -1
