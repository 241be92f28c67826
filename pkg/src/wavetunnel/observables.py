"""Measured quantities: packet maxima, region norms, the shift of the
transmitted maximum against a free reference, the envelope bound and
momentum-space diagnostics.

Regions are half-open site intervals ``(lo, hi)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .propagator import apply_hamiltonian
from .state import Grid, SquareBarrier, WaveFunction, density

__all__ = [
    "NoPacketError",
    "RunRecord",
    "MomentumSpectrum",
    "transmitted_region",
    "reflected_region",
    "barrier_region",
    "max_position",
    "region_norm",
    "shift_vs_free",
    "envelope_check",
    "momentum_distribution",
    "energy",
    "TRANSMISSION_FLOOR",
]

#: Transmitted norms below this carry no packet, only roundoff that has
#: outrun the wave front; no transmitted maximum is read from them.
TRANSMISSION_FLOOR = 1e-12


class NoPacketError(ValueError):
    """The requested region holds no probability (e.g. nothing transmitted yet)."""


def transmitted_region(barrier: SquareBarrier, grid: Grid):
    """Sites strictly right of the last barrier site."""
    return (barrier.end_site, grid.n_sites)


def reflected_region(barrier: SquareBarrier, grid: Grid):
    """Sites strictly left of the first barrier site."""
    return (0, barrier.start_site)


def barrier_region(barrier: SquareBarrier, grid: Grid):
    return (barrier.start_site, barrier.end_site)


def _check_region(region, n):
    lo, hi = region
    if not (0 <= lo <= hi <= n):
        raise ValueError(f"region {region} is not inside [0, {n}]")
    return int(lo), int(hi)


def max_position(dens, region=None) -> float:
    """Sub-grid position of the density maximum inside ``region``.

    The grid argmax (smallest index on ties) is refined with the vertex of
    the parabola through it and its two neighbours. A maximum on the first
    or last site of the region is returned unrefined.

    Raises
    ------
    NoPacketError
        If the region holds no strictly positive density.
    """
    dens = np.asarray(dens, dtype=float)
    lo, hi = _check_region((0, dens.shape[0]) if region is None else region, dens.shape[0])
    if hi - lo < 1:
        raise ValueError("region is empty")
    window = dens[lo:hi]
    j = int(np.argmax(window))
    if not window[j] > 0:
        raise NoPacketError(f"no positive density in region ({lo}, {hi})")
    if j == 0 or j == hi - lo - 1:
        return float(lo + j)
    left, mid, right = window[j - 1], window[j], window[j + 1]
    curvature = left - 2.0 * mid + right
    if curvature >= 0:
        return float(lo + j)
    return lo + j + 0.5 * (left - right) / curvature


def _is_edge_maximum(dens, region):
    lo, hi = region
    j = int(np.argmax(dens[lo:hi]))
    return j == 0 or j == hi - lo - 1


def region_norm(psi: WaveFunction, region) -> float:
    lo, hi = _check_region(region, psi.grid.n_sites)
    return float(np.sum(density(psi)[lo:hi]) * psi.grid.spacing)


def shift_vs_free(psi_tunneled: WaveFunction, psi_free: WaveFunction, barrier: SquareBarrier) -> float:
    """Transmitted-part maximum minus the free packet's maximum, in sites.

    Positive values mean the transmitted maximum is ahead of the free one.
    """
    if psi_tunneled.grid != psi_free.grid:
        raise ValueError("wave functions live on different grids")
    region = transmitted_region(barrier, psi_tunneled.grid)
    if region_norm(psi_tunneled, region) <= 1e-300:
        raise NoPacketError("nothing has been transmitted")
    return max_position(density(psi_tunneled), region) - max_position(density(psi_free))


def envelope_check(dens_tunneled, dens_free, barrier: SquareBarrier) -> float:
    """Largest pointwise excess of the tunneled density over the free one
    beyond the barrier. Values <= 0 mean the free packet bounds it."""
    dens_tunneled = np.asarray(dens_tunneled, dtype=float)
    dens_free = np.asarray(dens_free, dtype=float)
    if dens_tunneled.shape != dens_free.shape:
        raise ValueError("densities must share one grid")
    lo = barrier.end_site
    if lo >= dens_free.shape[0]:
        raise ValueError("barrier ends outside the grid")
    return float(np.max(dens_tunneled[lo:] - dens_free[lo:]))


@dataclass(frozen=True, eq=False)
class MomentumSpectrum:
    """Spectral weight on the lattice momenta in ``(-pi, pi]``, sorted by k.

    ``weight`` sums to the norm of the sampled region.
    """

    k: np.ndarray = field(repr=False)
    weight: np.ndarray = field(repr=False)

    @property
    def mean_positive_k(self) -> float:
        """Weighted mean wave number over ``k > 0``."""
        pos = self.k > 0
        total = np.sum(self.weight[pos])
        if not total > 0:
            raise NoPacketError("no right-moving weight")
        return float(np.sum(self.k[pos] * self.weight[pos]) / total)

    def pairs(self) -> np.ndarray:
        return np.column_stack([self.k, self.weight])


def momentum_distribution(psi: WaveFunction, region=None) -> MomentumSpectrum:
    """Discrete Fourier spectrum of ``psi`` restricted to ``region``.

    The wave function is zeroed outside the region and transformed over the
    whole grid, so ``k_m = 2 pi m / n_sites``.
    """
    n = psi.grid.n_sites
    lo, hi = _check_region((0, n) if region is None else region, n)
    if hi - lo < 16:
        raise ValueError(f"region must span at least 16 sites, got {hi - lo}")
    cut = np.zeros(n, dtype=np.complex128)
    cut[lo:hi] = psi.amplitudes[lo:hi]
    weight = np.abs(np.fft.fft(cut)) ** 2 / n
    k = 2.0 * np.pi * np.fft.fftfreq(n)
    k[np.isclose(k, -np.pi, rtol=0, atol=1e-15)] = np.pi
    order = np.argsort(k, kind="stable")
    return MomentumSpectrum(k=k[order], weight=weight[order])


def energy(psi: WaveFunction, potential) -> float:
    """Expectation value ``<psi|H|psi>`` of the lattice Hamiltonian."""
    a = psi.amplitudes
    return float(np.real(np.vdot(a, apply_hamiltonian(potential, a))))


@dataclass(eq=False)
class RunRecord:
    """Observables of one barrier run and its free reference over time.

    ``max_transmitted`` and ``shift`` are NaN at samples where the
    transmitted region holds no packet yet: its norm is below
    :data:`TRANSMISSION_FLOOR` or its maximum still sits on the barrier
    edge.
    """

    times: np.ndarray
    max_free: np.ndarray
    max_transmitted: np.ndarray
    shift: np.ndarray
    transmitted_norm: np.ndarray
    reflected_norm: np.ndarray
    barrier_norm: np.ndarray
    envelope_violation: float = -np.inf
    flags: tuple = ()

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, name), dtype=float) for name in self._array_fields]
        lengths = {a.shape for a in arrays}
        if len(lengths) > 1:
            raise ValueError(f"RunRecord arrays differ in shape: {lengths}")
        for name, a in zip(self._array_fields, arrays):
            setattr(self, name, a)

    _array_fields = (
        "times",
        "max_free",
        "max_transmitted",
        "shift",
        "transmitted_norm",
        "reflected_norm",
        "barrier_norm",
    )

    def __len__(self):
        return self.times.shape[0]

    @property
    def final_shift(self) -> float:
        return float(self.shift[-1])

    @property
    def final_transmitted_norm(self) -> float:
        return float(self.transmitted_norm[-1])


class RecordBuilder:
    """Accumulates :class:`RunRecord` samples for one (tunneled, free) pair."""

    def __init__(self, barrier: SquareBarrier, grid: Grid):
        self.barrier = barrier
        self.grid = grid
        self.t_region = transmitted_region(barrier, grid)
        self.r_region = reflected_region(barrier, grid)
        self.b_region = barrier_region(barrier, grid)
        self.rows = []
        self.envelope = -np.inf

    def add(self, t: float, psi_tunneled: WaveFunction, psi_free: WaveFunction) -> None:
        dt_, df = density(psi_tunneled), density(psi_free)
        lo, hi = self.t_region
        mfree = max_position(df)
        tn = float(np.sum(dt_[lo:hi]))
        if tn >= TRANSMISSION_FLOOR and not _is_edge_maximum(dt_, self.t_region):
            mt = max_position(dt_, self.t_region)
        else:
            mt = np.nan
        rn = float(np.sum(dt_[self.r_region[0]:self.r_region[1]]))
        bn = float(np.sum(dt_[self.b_region[0]:self.b_region[1]]))
        self.envelope = max(self.envelope, envelope_check(dt_, df, self.barrier))
        self.rows.append((t, mfree, mt, mt - mfree, tn, rn, bn))

    def build(self, flags=()) -> RunRecord:
        cols = np.array(self.rows, dtype=float).reshape(-1, 7).T
        return RunRecord(*cols, envelope_violation=self.envelope, flags=tuple(flags))
