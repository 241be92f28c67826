"""Lattice, wave functions, Gaussian packets and square barriers.

Units: hbar = m = 1 and the lattice spacing is one site, so energies are in
units of hbar^2 / (m site^2) and wave numbers in 1/site.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "WaveFunction",
    "SquareBarrier",
    "gaussian_packet",
    "sample_potential",
    "norm",
    "density",
]

#: Largest modulus allowed on a boundary site of a freshly prepared packet.
BOUNDARY_TOLERANCE = 1e-8

#: Minimum distance from the packet center to either wall, in units of sigma.
WALL_CLEARANCE_SIGMAS = 8.0


@dataclass(frozen=True)
class Grid:
    """Uniform 1D lattice with hard walls at both ends.

    The wave function is pinned to zero just outside sites ``0`` and
    ``n_sites - 1``; the propagator enforces this by dropping the couplings
    to the missing neighbours.
    """

    n_sites: int
    spacing: float = 1.0

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 3:
            raise ValueError(f"n_sites must be an integer >= 3, got {self.n_sites!r}")
        if self.spacing != 1.0:
            raise ValueError("only unit spacing (1 site) is supported")
        object.__setattr__(self, "n_sites", int(self.n_sites))

    @property
    def x(self) -> np.ndarray:
        """Site positions ``0, 1, ..., n_sites - 1``."""
        return np.arange(self.n_sites, dtype=float)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Complex amplitudes on a :class:`Grid`.

    The amplitude array is copied on construction and marked read-only.
    """

    grid: Grid
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128, copy=True)
        if amps.ndim != 1 or amps.shape[0] != self.grid.n_sites:
            raise ValueError(
                f"amplitudes must have shape ({self.grid.n_sites},), got {amps.shape}"
            )
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    def __len__(self):
        return self.grid.n_sites

    def conj(self) -> "WaveFunction":
        return WaveFunction(self.grid, np.conj(self.amplitudes))

    def scaled(self, factor: complex) -> "WaveFunction":
        return WaveFunction(self.grid, factor * self.amplitudes)


@dataclass(frozen=True)
class SquareBarrier:
    """Square barrier of ``width_d`` sites starting at ``start_site``.

    The height is given as the ratio ``height_ratio_h`` of the barrier
    energy to the incident kinetic energy ``k0**2 / 2``; :meth:`V0` turns it
    into an energy for a particular ``k0``.
    """

    start_site: int
    width_d: int
    height_ratio_h: float

    def __post_init__(self):
        if int(self.width_d) != self.width_d or self.width_d < 0:
            raise ValueError(f"width_d must be a non-negative integer, got {self.width_d!r}")
        if int(self.start_site) != self.start_site or self.start_site < 1:
            raise ValueError(f"start_site must be a positive integer, got {self.start_site!r}")
        if not np.isfinite(self.height_ratio_h) or self.height_ratio_h < 0:
            raise ValueError(f"height_ratio_h must be >= 0, got {self.height_ratio_h!r}")
        object.__setattr__(self, "start_site", int(self.start_site))
        object.__setattr__(self, "width_d", int(self.width_d))
        object.__setattr__(self, "height_ratio_h", float(self.height_ratio_h))

    @property
    def end_site(self) -> int:
        """One past the last barrier site."""
        return self.start_site + self.width_d

    def V0(self, k0: float) -> float:
        return self.height_ratio_h * (k0 * k0 / 2.0)

    def check_fits(self, grid: Grid) -> None:
        if not self.start_site + self.width_d < grid.n_sites - 1:
            raise ValueError(
                f"barrier [{self.start_site}, {self.end_site}) does not fit inside "
                f"a grid of {grid.n_sites} sites"
            )


def gaussian_packet(grid: Grid, x0: float, sigma: float, k0: float) -> WaveFunction:
    """Normalized Gaussian packet ``exp(-(x - x0)^2 / (4 sigma^2) + i k0 x)``.

    Parameters
    ----------
    grid : Grid
    x0 : float
        Packet center in sites.
    sigma : float
        Standard deviation of the probability density ``|psi|^2`` (not of
        ``psi`` itself, which is wider by a factor sqrt(2)).
    k0 : float
        Carrier wave number in 1/site.

    Returns
    -------
    WaveFunction
        Normalized with the discrete sum, so ``norm(psi) == 1``.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    if not np.isfinite(k0):
        raise ValueError(f"k0 must be finite, got {k0!r}")
    margin = WALL_CLEARANCE_SIGMAS * sigma
    if x0 - margin < 0 or x0 + margin > grid.n_sites - 1:
        raise ValueError(
            f"x0={x0} is closer than {WALL_CLEARANCE_SIGMAS:g} sigma to a wall "
            f"of a {grid.n_sites}-site grid"
        )
    x = grid.x
    envelope = np.exp(-((x - x0) ** 2) / (4.0 * sigma * sigma))
    amps = envelope * np.exp(1j * k0 * x)
    amps /= np.sqrt(np.sum(envelope * envelope) * grid.spacing)
    return WaveFunction(grid, amps)


def sample_potential(barrier: SquareBarrier, grid: Grid, k0: float) -> np.ndarray:
    """Potential energy per site: ``h k0^2 / 2`` on the barrier, 0 elsewhere."""
    barrier.check_fits(grid)
    V = np.zeros(grid.n_sites)
    V[barrier.start_site:barrier.end_site] = barrier.V0(k0)
    return V


def norm(psi: WaveFunction) -> float:
    return float(np.sum(density(psi)) * psi.grid.spacing)


def density(psi: WaveFunction) -> np.ndarray:
    a = psi.amplitudes
    return a.real * a.real + a.imag * a.imag
