"""Compiled inner loops for the primal and dual finite-volume schemes."""
from __future__ import annotations

import numpy as np
from numba import njit

LIMITERS = {"none": 0, "minmod": 1, "mc": 2, "superbee": 3}


@njit(cache=True, fastmath=True)
def _limited_slope(a, b, kind):
    if kind == 0 or a * b <= 0.0:
        return 0.0
    s = 1.0 if a > 0.0 else -1.0
    aa = abs(a)
    bb = abs(b)
    if kind == 1:
        return s * min(aa, bb)
    if kind == 2:
        return s * min(2.0 * aa, 2.0 * bb, 0.5 * (aa + bb))
    return s * max(min(2.0 * aa, bb), min(aa, 2.0 * bb))


@njit(cache=True, fastmath=True, inline="always")
def _wpow(x, m, m_int):
    if m_int == 1:
        return x
    if m_int > 1:
        y = 1.0
        b = x
        k = m_int
        while k > 0:
            if k & 1:
                y *= b
            b *= b
            k >>= 1
        return y
    return x ** m


@njit(cache=True, fastmath=True)
def primal_fluxes(u, F, lo, hi, dx, is_rhe, m, nu, c, limiter, eps_visc, floor):
    """Fill face fluxes ``F[f]`` (face ``f`` sits between cells ``f-1`` and ``f``)
    for the faces touching cells ``lo-2 .. hi+2``. Returns the cell window."""
    n = u.size
    r2 = (nu / c) ** 2
    m_int = 1 if is_rhe else (int(m) if m == int(m) else 0)
    s = max(lo - 3, 0)
    e = min(hi + 4, n)
    f0 = max(s, 1)
    f1 = min(e, n)
    # rolling state for cell f-1
    if f0 - 1 == 0:
        sl_prev = 0.0
    else:
        sl_prev = _limited_slope(u[f0 - 1] - u[f0 - 2], u[f0] - u[f0 - 1], limiter)
    w_prev = _wpow(u[f0 - 1], m, m_int)
    for f in range(f0, f1):
        uf = u[f]
        if f == n - 1:
            sl = 0.0
        else:
            sl = _limited_slope(uf - u[f - 1], u[f + 1] - uf, limiter)
        wf = _wpow(uf, m, m_int)
        xi = (wf - w_prev) / dx
        if xi < 0.0:
            z = u[f - 1] + 0.5 * sl_prev
        elif xi > 0.0:
            z = uf - 0.5 * sl
        else:
            z = 0.5 * (u[f - 1] + uf)
        if is_rhe:
            if z <= floor:
                val = 0.0
            else:
                val = nu * z * xi / np.sqrt(z * z + r2 * xi * xi)
        else:
            val = nu * z * xi / np.sqrt(1.0 + r2 * xi * xi)
        if eps_visc > 0.0:
            val += eps_visc * (uf - u[f - 1]) / dx
        F[f] = val
        sl_prev = sl
        w_prev = wf
    return s, e


@njit(cache=True, fastmath=True)
def _support(u, floor, start, stop):
    lo = -1
    hi = -1
    for i in range(start, stop):
        if u[i] > floor:
            lo = i
            break
    if lo < 0:
        return -1, -1
    for i in range(stop - 1, lo - 1, -1):
        if u[i] > floor:
            hi = i
            break
    return lo, hi


@njit(cache=True, fastmath=True)
def primal_advance(u, dx, dt, nsteps, is_rhe, m, nu, c, limiter, eps_visc, floor,
                   fixed_vals, fixed_rate, buffer):
    """Advance ``u`` in place by ``nsteps`` forward-Euler steps.

    The first ``k = fixed_vals.size`` cells are Dirichlet data, set to
    ``fixed_vals + fixed_rate * (elapsed time)`` before every step. Returns
    ``(steps_done, status)``; status 1 means the support entered the buffer.
    """
    n = u.size
    k = fixed_vals.size
    F = np.zeros(n + 1)
    lam = dt / dx
    for i in range(k):
        u[i] = fixed_vals[i]
    lo, hi = _support(u, 0.0, 0, n)
    if lo < 0:
        return nsteps, 0
    for step in range(nsteps):
        for i in range(k):
            u[i] = fixed_vals[i] + fixed_rate[i] * (step * dt)
        if (k == 0 and lo < buffer) or hi > n - 1 - buffer:
            return step, 1
        s, e = primal_fluxes(u, F, lo, hi, dx, is_rhe, m, nu, c, limiter, eps_visc, floor)
        F[0] = 0.0
        F[n] = 0.0
        for i in range(max(s, k), min(e, n)):
            u[i] += lam * (F[i + 1] - F[i])
        for f in range(max(s, 1), min(e, n)):
            F[f] = 0.0
        # support can grow by at most one cell per side and step
        lo, hi = _support(u, 0.0, max(lo - 1, 0), min(hi + 2, n))
        if lo < 0:
            return step + 1, 0
    for i in range(k):
        u[i] = fixed_vals[i] + fixed_rate[i] * (nsteps * dt)
    return nsteps, 0


@njit(cache=True, fastmath=True)
def dual_fluxes(v, F, deta, m, eps, q):
    """Face fluxes of the normalised dual equation with prescribed boundary flux ``q``."""
    n = v.size
    p = 4.0 + 2.0 * m
    p_int = int(p) if p == int(p) else 0
    F[0] = -q
    F[n] = q
    for f in range(1, n):
        g = (v[f] - v[f - 1]) / deta
        z = 0.5 * (v[f] + v[f - 1])
        F[f] = g / np.sqrt(_wpow(z, p, p_int) + g * g) + eps * g


@njit(cache=True, fastmath=True)
def dual_advance(v, deta, dt, nsteps, m, eps, q, cap, share, armed):
    """Advance the dual profile by up to ``nsteps`` steps.

    Returns ``(steps_done, status)``: status 1 when ``max v`` exceeds ``cap``,
    2 (left) or 3 (right) when the saturated part of the flux through the
    face next to a boundary falls below ``share * q`` after having exceeded
    it. ``armed`` (two flags) carries that history between calls.
    """
    n = v.size
    F = np.zeros(n + 1)
    lam = dt / deta
    for step in range(nsteps):
        dual_fluxes(v, F, deta, m, eps, q)
        sat_l = -(F[1] - eps * (v[1] - v[0]) / deta)
        sat_r = F[n - 1] - eps * (v[n - 1] - v[n - 2]) / deta
        if armed[0] == 0 and sat_l >= share * q:
            armed[0] = 1
        if armed[1] == 0 and sat_r >= share * q:
            armed[1] = 1
        if armed[0] == 1 and sat_l < share * q:
            return step, 2
        if armed[1] == 1 and sat_r < share * q:
            return step, 3
        vmax = 0.0
        for j in range(n):
            v[j] += lam * (F[j + 1] - F[j])
            if v[j] > vmax:
                vmax = v[j]
        if vmax > cap:
            return step + 1, 1
    return nsteps, 0
