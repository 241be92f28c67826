"""Norm-conserving Crank-Nicolson propagation on the lattice.

The Hamiltonian is the 3-point stencil

    (H psi)_j = (-psi_{j-1} + 2 psi_j - psi_{j+1}) / 2 + V_j psi_j

with the neighbours beyond either end dropped (hard walls). One step solves
``(1 + i dt H / 2) psi' = (1 - i dt H / 2) psi``, which is unitary for
Hermitian ``H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .state import BOUNDARY_TOLERANCE, Grid, WaveFunction

__all__ = [
    "Stepper",
    "BoundaryContaminationError",
    "NumericalBlowUpError",
    "build_stepper",
    "step",
    "evolve",
    "evolve_many",
    "apply_hamiltonian",
]

Observer = Callable[[int, WaveFunction], None]


class BoundaryContaminationError(RuntimeError):
    """Probability reached a hard wall; the run no longer models free space."""


class NumericalBlowUpError(FloatingPointError):
    """Non-finite amplitudes appeared in the input or output of a step."""


@dataclass(frozen=True, eq=False)
class Stepper:
    """Precomputed Crank-Nicolson factors for one (grid, potential, dt).

    ``diag`` and ``offdiag`` are the entries of ``1 + i dt H / 2``. The
    Thomas factors are computed once at construction and are read-only, so
    a stepper can be shared between simulations.
    """

    grid: Grid
    potential: np.ndarray = field(repr=False)
    dt: float
    diag: np.ndarray = field(repr=False)
    offdiag: complex
    rhs_diag: np.ndarray = field(repr=False)
    rhs_offdiag: complex
    inv_denom: np.ndarray = field(repr=False)
    coupling: np.ndarray = field(repr=False)
    cprime: np.ndarray = field(repr=False)


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def build_stepper(grid: Grid, potential, dt: float) -> Stepper:
    """Assemble and factor the Crank-Nicolson system for ``grid``.

    Raises
    ------
    ValueError
        On a potential of the wrong length, non-finite potential values or
        ``dt <= 0``.
    """
    V = np.array(potential, dtype=float, copy=True)
    if V.shape != (grid.n_sites,):
        raise ValueError(f"potential must have shape ({grid.n_sites},), got {V.shape}")
    if not np.all(np.isfinite(V)):
        raise ValueError("potential contains non-finite values")
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt!r}")

    half = 0.5j * dt
    h_diag = 1.0 + V  # kinetic 2/2 plus potential
    h_off = -0.5
    diag = 1.0 + half * h_diag
    offdiag = complex(half * h_off)
    rhs_diag = 1.0 - half * h_diag
    rhs_offdiag = -offdiag

    # Thomas without pivoting needs strict diagonal dominance
    if not np.all(np.abs(diag) > 2.0 * abs(offdiag)):
        raise ValueError(
            "Crank-Nicolson matrix is not diagonally dominant; reduce dt or check the potential"
        )
    inv_denom, coupling, cprime = _kernels.thomas_factor(diag, offdiag)

    return Stepper(
        grid=grid,
        potential=_frozen(V),
        dt=float(dt),
        diag=_frozen(diag),
        offdiag=offdiag,
        rhs_diag=_frozen(rhs_diag),
        rhs_offdiag=rhs_offdiag,
        inv_denom=_frozen(inv_denom),
        coupling=_frozen(coupling),
        cprime=_frozen(cprime),
    )


def apply_hamiltonian(potential, psi_amps) -> np.ndarray:
    """Return ``H psi`` for the hard-wall lattice Hamiltonian."""
    psi_amps = np.asarray(psi_amps)
    out = (1.0 + np.asarray(potential)) * psi_amps
    out[1:] -= 0.5 * psi_amps[:-1]
    out[:-1] -= 0.5 * psi_amps[1:]
    return out


def _check_finite(amps, where):
    if not np.all(np.isfinite(amps)):
        raise NumericalBlowUpError(f"non-finite amplitudes in {where}")


def _boundary_density(amps):
    ends = amps[[0, -1]]
    return np.max(ends.real ** 2 + ends.imag ** 2, axis=0)


def _check_psi(stepper, psi):
    if psi.grid != stepper.grid:
        raise ValueError("wave function and stepper live on different grids")


def step(stepper: Stepper, psi: WaveFunction) -> WaveFunction:
    """Advance ``psi`` by one time step."""
    _check_psi(stepper, psi)
    _check_finite(psi.amplitudes, "step input")
    work = np.array(psi.amplitudes, dtype=np.complex128)[:, None]
    _run_block(work, [stepper], 1)
    _check_finite(work, "step output")
    return WaveFunction(psi.grid, work[:, 0])


_FACTORS = ("rhs_diag", "inv_denom", "coupling", "cprime")


def _stack(steppers, attr):
    return np.ascontiguousarray(np.stack([getattr(s, attr) for s in steppers], axis=1))


def _run_block(work, steppers, n_steps, stacked=None):
    if stacked is None:
        stacked = {a: _stack(steppers, a) for a in _FACTORS}
    _kernels.cn_steps(
        work,
        stacked["rhs_diag"],
        steppers[0].rhs_offdiag,
        stacked["inv_denom"],
        stacked["coupling"],
        stacked["cprime"],
        n_steps,
    )


def evolve(
    stepper: Stepper,
    psi: WaveFunction,
    n_steps: int,
    observer: Optional[Observer] = None,
    stride: int = 1,
    boundary_tolerance: float = BOUNDARY_TOLERANCE,
) -> WaveFunction:
    """Apply :func:`step` ``n_steps`` times.

    ``observer(step_index, psi)`` is called at step 0, at every multiple of
    ``stride`` and at the final step. The boundary density is checked at the
    same points.

    Raises
    ------
    BoundaryContaminationError
        If the density on either end site exceeds ``boundary_tolerance``.
    NumericalBlowUpError
        If amplitudes become non-finite.
    """
    _check_psi(stepper, psi)
    (out,) = evolve_many([stepper], [psi], n_steps, observer=observer and (lambda i, ps: observer(i, ps[0])),
                         stride=stride, boundary_tolerance=boundary_tolerance)
    return out


def evolve_many(
    steppers: Sequence[Stepper],
    psis: Sequence[WaveFunction],
    n_steps: int,
    observer: Optional[Callable[[int, list], None]] = None,
    stride: int = 1,
    boundary_tolerance: float = BOUNDARY_TOLERANCE,
) -> list:
    """Evolve independent runs side by side.

    All steppers must share one grid and one ``dt``; each wave function is
    paired with the stepper at the same index. The result is bit-for-bit the
    same as calling :func:`evolve` on each pair.
    """
    if int(n_steps) != n_steps or n_steps < 0:
        raise ValueError(f"n_steps must be a non-negative integer, got {n_steps!r}")
    if int(stride) != stride or stride < 1:
        raise ValueError(f"stride must be a positive integer, got {stride!r}")
    if len(steppers) != len(psis) or not steppers:
        raise ValueError("need one stepper per wave function and at least one run")
    grid, dt = steppers[0].grid, steppers[0].dt
    for s, p in zip(steppers, psis):
        if s.grid != grid or s.dt != dt:
            raise ValueError("all steppers must share the same grid and dt")
        _check_psi(s, p)
        _check_finite(p.amplitudes, "evolve input")
    n_steps = int(n_steps)

    if n_steps == 0:
        if observer is not None:
            observer(0, list(psis))
        return list(psis)

    work = np.ascontiguousarray(np.stack([p.amplitudes for p in psis], axis=1))
    stacked = {a: _stack(steppers, a) for a in _FACTORS}

    def snapshot():
        return [WaveFunction(grid, work[:, c]) for c in range(work.shape[1])]

    if observer is not None:
        observer(0, snapshot())
    done = 0
    while done < n_steps:
        block = min(stride, n_steps - done)
        _run_block(work, steppers, block, stacked)
        done += block
        _check_finite(work, f"evolve output at step {done}")
        edge = _boundary_density(work)
        if np.any(edge > boundary_tolerance):
            raise BoundaryContaminationError(
                f"boundary density {float(edge.max()):.3g} exceeds {boundary_tolerance:g} "
                f"at step {done}"
            )
        if observer is not None:
            observer(done, snapshot())
    return snapshot()
