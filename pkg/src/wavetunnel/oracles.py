"""Closed-form references: free Gaussian spreading, square-barrier
transmission and group velocities.

Continuum formulas use ``E = k^2 / 2``. The lattice Hamiltonian instead
has ``E(k) = 1 - cos k``; :func:`lattice_energy`, :func:`lattice_transmission`
and ``group_velocity(..., lattice=True)`` give the lattice counterparts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FreeGaussianParams",
    "free_gaussian_density",
    "free_gaussian_width",
    "plane_wave_transmission",
    "transfer_matrix_transmission",
    "lattice_transmission",
    "lattice_energy",
    "group_velocity",
    "packet_transmission",
]


@dataclass(frozen=True)
class FreeGaussianParams:
    x0: float
    sigma0: float
    k0: float

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0!r}")


def free_gaussian_width(sigma0, t):
    """Standard deviation of the density of a free Gaussian at time ``t``."""
    return np.sqrt(sigma0 ** 2 + (t / (2.0 * sigma0)) ** 2)


def free_gaussian_density(params: FreeGaussianParams, x, t):
    """Exact ``|psi(x, t)|^2`` for a free continuum Gaussian packet.

    A normalized Gaussian centered at ``x0 + k0 t`` whose variance grows as
    ``sigma0^2 + (t / (2 sigma0))^2``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    s = free_gaussian_width(params.sigma0, t)
    x = np.asarray(x, dtype=float)
    center = params.x0 + params.k0 * t
    return np.exp(-((x - center) ** 2) / (2.0 * s * s)) / (np.sqrt(2.0 * np.pi) * s)


def plane_wave_transmission(E, V0, d):
    """Transmission probability of a continuum square barrier.

    Parameters
    ----------
    E : float or array_like
        Incident energy, ``E > 0``.
    V0 : float
        Barrier height, ``V0 >= 0``.
    d : float
        Barrier width in sites.

    Returns
    -------
    float or ndarray
        ``T`` in ``[0, 1]``. Tunneling (``E < V0``) uses ``sinh``, above
        the barrier ``sin``, and ``E == V0`` the limit ``1 / (1 + E d^2 / 2)``.
    """
    E_arr = np.asarray(E, dtype=float)
    if np.any(~(E_arr > 0)):
        raise ValueError("E must be positive")
    if V0 < 0 or d < 0:
        raise ValueError("V0 and d must be non-negative")
    scalar = E_arr.ndim == 0
    E_arr = np.atleast_1d(E_arr)
    T = np.ones_like(E_arr)
    if V0 > 0 and d > 0:
        below = E_arr < V0
        above = E_arr > V0
        at = ~(below | above)
        Eb = E_arr[below]
        kappa = np.sqrt(2.0 * (V0 - Eb))
        T[below] = 1.0 / (1.0 + V0 ** 2 * np.sinh(kappa * d) ** 2 / (4.0 * Eb * (V0 - Eb)))
        Ea = E_arr[above]
        q = np.sqrt(2.0 * (Ea - V0))
        T[above] = 1.0 / (1.0 + V0 ** 2 * np.sin(q * d) ** 2 / (4.0 * Ea * (Ea - V0)))
        T[at] = 1.0 / (1.0 + E_arr[at] * d * d / 2.0)
    return float(T[0]) if scalar else T


def transfer_matrix_transmission(E: float, V0: float, d: float) -> float:
    """Continuum square-barrier transmission from matching conditions.

    Independent of :func:`plane_wave_transmission`: plane-wave amplitudes
    are carried across both barrier edges with 2x2 matching matrices.
    Not defined at ``E == V0`` exactly.
    """
    if not E > 0:
        raise ValueError("E must be positive")
    k = np.sqrt(2.0 * E)
    q = np.sqrt(complex(2.0 * (E - V0)))
    if q == 0:
        raise ValueError("transfer matrix is singular at E == V0")

    def waves(kk, x):
        # rows: psi, psi'; columns: right- and left-moving components
        return np.array(
            [[np.exp(1j * kk * x), np.exp(-1j * kk * x)],
             [1j * kk * np.exp(1j * kk * x), -1j * kk * np.exp(-1j * kk * x)]]
        )

    M = (np.linalg.solve(waves(k, d), waves(q, d))
         @ np.linalg.solve(waves(q, 0.0), waves(k, 0.0)))
    # right side holds (t, 0) for left side (1, r): t = det(M) / M[1, 1]
    t = np.linalg.det(M) / M[1, 1]
    return float(abs(t) ** 2)


def lattice_energy(k):
    """Dispersion of the 3-point lattice Laplacian, ``1 - cos k``."""
    return 1.0 - np.cos(k)


def lattice_transmission(k, V0: float, d: int):
    """Exact transmission through ``d`` lattice sites of height ``V0``.

    Integrates the stationary lattice equation
    ``psi_{j-1} = 2 (1 + V_j - E) psi_j - psi_{j+1}`` backwards from a pure
    outgoing wave and reads off the incident amplitude.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any((k <= 0) | (k >= np.pi)):
        raise ValueError("k must lie in (0, pi)")
    E = lattice_energy(k)
    # barrier on sites 0..d-1, psi_j = exp(i k j) for j >= d
    ahead = np.exp(1j * k * (d + 1))
    here = np.exp(1j * k * d)
    for j in range(d, -1, -1):
        Vj = V0 if j < d else 0.0
        ahead, here = here, 2.0 * (1.0 + Vj - E) * here - ahead
    # here = psi_{-1}, ahead = psi_0; left of the barrier psi_j = A e^{ikj} + B e^{-ikj}
    eik = np.exp(1j * k)
    incident = (ahead * eik - here) / (eik - 1.0 / eik)
    T = 1.0 / np.abs(incident) ** 2
    return float(T[0]) if T.shape == (1,) else T


def group_velocity(k0, lattice: bool = False):
    """``dE/dk`` at ``k0``: ``k0`` in the continuum, ``sin k0`` on the lattice."""
    return np.sin(k0) if lattice else k0 * 1.0


def packet_transmission(amplitudes, V0: float, d: int, model: str = "lattice-dispersion") -> float:
    """Transmitted probability predicted by filtering the packet's spectrum.

    Sums ``|psi~(k)|^2 T(k)`` over the right-moving lattice momenta of the
    discrete Fourier transform of ``amplitudes``.

    ``model`` selects ``T``:

    - ``"lattice-dispersion"``: :func:`plane_wave_transmission` evaluated at
      the lattice energy ``1 - cos k``.
    - ``"lattice-exact"``: :func:`lattice_transmission`.
    - ``"continuum"``: :func:`plane_wave_transmission` at ``k^2 / 2``.
    """
    amps = np.asarray(amplitudes, dtype=np.complex128)
    n = amps.shape[0]
    weight = np.abs(np.fft.fft(amps)) ** 2 / n
    k = 2.0 * np.pi * np.fft.fftfreq(n)
    mask = (k > 0) & (k < np.pi)
    k, weight = k[mask], weight[mask]
    if model == "lattice-dispersion":
        T = plane_wave_transmission(lattice_energy(k), V0, d)
    elif model == "lattice-exact":
        T = lattice_transmission(k, V0, d)
    elif model == "continuum":
        T = plane_wave_transmission(k * k / 2.0, V0, d)
    else:
        raise ValueError(f"unknown model {model!r}")
    return float(np.sum(weight * T))
