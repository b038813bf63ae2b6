"""Compiled inner loops for the finite-difference integrator."""

import numpy as np
from numba import njit

OK = 0
NEGATIVE_DENSITY = 1
NON_FINITE = 2
NEGATIVE_SIGNAL = 3

# negative densities down to this size are rounding noise and are zeroed
NEGATIVE_TOL = 1e-12


@njit(cache=True)
def thomas_factor(n, off, diag_first, diag, diag_last):
    """LU sweep coefficients for a constant-off-diagonal tridiagonal matrix."""
    cp = np.empty(n)
    inv = np.empty(n)
    inv[0] = 1.0 / diag_first
    cp[0] = off * inv[0]
    for i in range(1, n):
        b = diag_last if i == n - 1 else diag
        inv[i] = 1.0 / (b - off * cp[i - 1])
        cp[i] = off * inv[i]
    return cp, inv


@njit(cache=True)
def thomas_solve(rhs, off, cp, inv, out):
    n = rhs.shape[0]
    out[0] = rhs[0] * inv[0]
    for i in range(1, n):
        out[i] = (rhs[i] - off * out[i - 1]) * inv[i]
    for i in range(n - 2, -1, -1):
        out[i] -= cp[i] * out[i + 1]


@njit(cache=True)
def update(rho, S, U, dx, dt, p, rho_c, g_left, g_right, off, cp, inv, new):
    """Advance rho by one step given face velocities U, then re-solve S.

    Ghost cells are 2 g - rho at each wall. Returns a status code and the
    first offending cell index (or -1).
    """
    n = rho.shape[0]
    inv_dx2 = 1.0 / (dx * dx)
    half_inv_dx = 0.5 / dx
    for i in range(n):
        rm = 2.0 * g_left - rho[0] if i == 0 else rho[i - 1]
        rp = 2.0 * g_right - rho[n - 1] if i == n - 1 else rho[i + 1]
        r = rho[i]
        adv = (U[i + 1] * (rp + r) - U[i] * (r + rm)) * half_inv_dx
        dif = (rp - 2.0 * r + rm) * inv_dx2
        growth = p if r <= rho_c else 1.0 / r - 1.0
        new[i] = (r + dt * (dif - adv)) / (1.0 - dt * growth)
    for i in range(n):
        v = new[i]
        if not np.isfinite(v):
            return NON_FINITE, i
        if v < 0.0:
            if v < -NEGATIVE_TOL:
                return NEGATIVE_DENSITY, i
            v = 0.0
        rho[i] = v

    c = -off
    S[0] = (rho[0] + 2.0 * g_left * c) * inv[0]
    for i in range(1, n - 1):
        S[i] = (rho[i] - off * S[i - 1]) * inv[i]
    S[n - 1] = (rho[n - 1] + 2.0 * g_right * c - off * S[n - 2]) * inv[n - 1]
    for i in range(n - 2, -1, -1):
        S[i] -= cp[i] * S[i + 1]
    for i in range(n):
        if S[i] < 0.0:
            return NEGATIVE_SIGNAL, i
    return OK, -1
