"""Compiled inner loops for the Crank-Nicolson propagator.

Arrays are laid out ``(n_sites, n_runs)`` so that several independent runs
sharing one grid and time step advance together; the Thomas sweeps are
latency bound and interleaving columns hides most of that latency.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def thomas_factor(diag, off):
    """Forward-elimination factors for a symmetric tridiagonal matrix.

    ``diag`` holds one column of main-diagonal entries; ``off`` is the
    constant off-diagonal. Returns ``(inv_denom, cprime)``.
    """
    n = diag.shape[0]
    inv_denom = np.empty(n, np.complex128)
    cprime = np.empty(n, np.complex128)
    denom = diag[0]
    inv_denom[0] = 1.0 / denom
    cprime[0] = off / denom
    for i in range(1, n):
        denom = diag[i] - off * cprime[i - 1]
        inv_denom[i] = 1.0 / denom
        cprime[i] = off / denom
    # last cprime is never read by the back substitution
    cprime[n - 1] = 0.0
    return inv_denom, off * inv_denom, cprime


@numba.njit(cache=True)
def cn_steps(psi, rhs_diag, rhs_off, inv_denom, coupling, cprime, n_steps):
    """Advance every column of ``psi`` in place by ``n_steps`` steps.

    Each step solves ``(1 + i dt H / 2) psi' = (1 - i dt H / 2) psi``. The
    right-hand side is formed on the fly inside the forward sweep, so the
    old value of the left neighbour is carried in ``prev``. ``coupling`` is
    ``offdiag * inv_denom``, which keeps one complex product off the
    recurrence.
    """
    n, m = psi.shape
    prev = np.empty(m, np.complex128)
    for _ in range(n_steps):
        for c in range(m):
            cur = psi[0, c]
            b = rhs_diag[0, c] * cur + rhs_off * psi[1, c]
            prev[c] = cur
            psi[0, c] = b * inv_denom[0, c]
        for i in range(1, n - 1):
            for c in range(m):
                cur = psi[i, c]
                b = rhs_diag[i, c] * cur + rhs_off * (prev[c] + psi[i + 1, c])
                prev[c] = cur
                psi[i, c] = b * inv_denom[i, c] - coupling[i, c] * psi[i - 1, c]
        for c in range(m):
            b = rhs_diag[n - 1, c] * psi[n - 1, c] + rhs_off * prev[c]
            psi[n - 1, c] = b * inv_denom[n - 1, c] - coupling[n - 1, c] * psi[n - 2, c]
        for i in range(n - 2, -1, -1):
            for c in range(m):
                psi[i, c] -= cprime[i, c] * psi[i + 1, c]
    return psi
