"""Paired barrier/free simulations and the three parameter sweeps.

Every barrier run is paired with a free run started from the very same
amplitude array, evolved with the same ``dt`` for the same number of steps.
Within a sweep one free run per packet width serves all pairs of that
width.
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .observables import (
    TRANSMISSION_FLOOR,
    NoPacketError,
    RecordBuilder,
    RunRecord,
    momentum_distribution,
    transmitted_region,
)
from .oracles import free_gaussian_width, group_velocity
from .propagator import build_stepper, evolve_many
from .state import Grid, SquareBarrier, density, gaussian_packet, sample_potential

__all__ = [
    "ExperimentConfig",
    "PairResult",
    "SummaryRow",
    "ExperimentResult",
    "EXPERIMENT_DEFAULTS",
    "run_pair",
    "run_points",
    "snapshot_experiment",
    "height_sweep",
    "width_scan",
    "NO_TRANSMISSION",
]

log = logging.getLogger(__name__)

NO_TRANSMISSION = "no_transmission"
UNSETTLED = "unsettled"
NEAR_BARRIER = "near_barrier"
NO_PEAK = "no_peak"

#: Transmitted norm counts as settled below this relative change per 100 steps.
SETTLE_TOLERANCE = 1e-6
#: Columns evolved together by the batched kernel.
BATCH_SIZE = 8


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of a single run or a sweep.

    ``d_values``, ``h_values`` and ``sigma_values`` are the sweep axes; a
    single run uses their first entries. An empty ``sigma_values`` means
    ``(sigma,)``.
    """

    n_sites: int = 12288
    x0: float = 5700.0
    sigma: float = 10.0
    k0: float = 0.5
    barrier_start: int = 6000
    d_values: Tuple[int, ...] = (20,)
    h_values: Tuple[float, ...] = (2.0,)
    sigma_values: Tuple[float, ...] = ()
    dt: float = 0.05
    n_steps: int = 40000
    stride: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "d_values", tuple(int(d) for d in self.d_values))
        object.__setattr__(self, "h_values", tuple(float(h) for h in self.h_values))
        object.__setattr__(self, "sigma_values", tuple(float(s) for s in self.sigma_values))

    @property
    def sigmas(self) -> Tuple[float, ...]:
        return self.sigma_values or (float(self.sigma),)

    @property
    def snapshot_time(self) -> float:
        return self.n_steps * self.dt

    @property
    def grid(self) -> Grid:
        return Grid(self.n_sites)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("d_values", "h_values", "sigma_values"):
            d[key] = list(d[key])
        return d

    def validate(self) -> "ExperimentConfig":
        """Check every constraint, raising ``ValueError`` that names the field."""

        def bad(name, why):
            raise ValueError(f"{name}: {why}")

        if int(self.n_sites) != self.n_sites or self.n_sites < 3:
            bad("n_sites", "must be an integer >= 3")
        for s in self.sigmas:
            if not s > 0:
                bad("sigma", f"must be positive, got {s:g}")
        if not np.isfinite(self.k0):
            bad("k0", "must be finite")
        if not (np.isfinite(self.dt) and self.dt > 0):
            bad("dt", f"must be positive, got {self.dt!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            bad("n_steps", "must be a non-negative integer")
        if int(self.stride) != self.stride or self.stride < 1:
            bad("stride", "must be a positive integer")
        if not self.d_values:
            bad("d_values", "must not be empty")
        if not self.h_values:
            bad("h_values", "must not be empty")
        for d in self.d_values:
            if d < 0:
                bad("d_values", f"barrier width must be >= 0, got {d}")
            if not self.barrier_start + d < self.n_sites - 1:
                bad("barrier_start", f"barrier of width {d} at {self.barrier_start} leaves the grid")
        for h in self.h_values:
            if not (np.isfinite(h) and h >= 0):
                bad("h_values", f"height ratio must be >= 0, got {h!r}")
        grid = self.grid
        for s in self.sigmas:
            margin = 8.0 * s
            if self.x0 - margin < 0 or self.x0 + margin > grid.n_sites - 1:
                bad("x0", f"packet of sigma {s:g} at {self.x0:g} is within 8 sigma of a wall")
            if self.x0 + margin > self.barrier_start:
                bad("x0", f"packet of sigma {s:g} at {self.x0:g} overlaps the barrier")
            t = self.snapshot_time
            front = self.x0 + group_velocity(abs(self.k0), lattice=True) * t + 8.0 * free_gaussian_width(s, t)
            if front > grid.n_sites - 1:
                bad("n_steps", f"free packet of sigma {s:g} reaches the right wall before t={t:g}")
        return self


#: Built-in defaults per CLI subcommand. The three sweeps use a slower
#: carrier (k0 = 0.2) and a later snapshot; see README for the reasoning.
EXPERIMENT_DEFAULTS: Dict[str, dict] = {
    "single-run": dict(),
    "snapshot": dict(k0=0.2, n_steps=50000, d_values=(5, 10, 15, 20, 25), h_values=(2.0,)),
    "height-sweep": dict(k0=0.2, n_steps=50000, d_values=(20,), h_values=(0.5, 1.0, 1.5, 2.0, 3.0, 4.0)),
    "width-scan": dict(
        k0=0.2,
        n_steps=50000,
        d_values=tuple(range(0, 31, 2)),
        h_values=(2.0,),
        sigma_values=(5.0, 10.0, 15.0, 20.0),
    ),
}


def default_config(experiment: str = "single-run", **overrides) -> ExperimentConfig:
    return ExperimentConfig(**{**EXPERIMENT_DEFAULTS[experiment], **overrides})


@dataclass(eq=False)
class PairResult:
    """One barrier run with its free reference."""

    sigma: float
    d: int
    h: float
    record: RunRecord
    density_tunneled: np.ndarray = field(repr=False)
    density_free: np.ndarray = field(repr=False)
    peak_amplitude: float
    mean_k_transmitted: float
    initial_checksum: str
    flags: Tuple[str, ...] = ()

    @property
    def shift(self) -> float:
        return self.record.final_shift

    @property
    def transmitted_norm(self) -> float:
        return self.record.final_transmitted_norm


@dataclass(frozen=True)
class SummaryRow:
    sigma: float
    d: int
    h: float
    snapshot_time: float
    max_free: float
    max_transmitted: float
    shift: float
    transmitted_norm: float
    flags: Tuple[str, ...] = ()
    peak_amplitude: float = float("nan")
    mean_k_transmitted: float = float("nan")
    envelope_violation: float = float("nan")
    reflected_norm: float = float("nan")

    @property
    def key(self):
        return (self.sigma, self.d, self.h)


@dataclass(eq=False)
class ExperimentResult:
    name: str
    config: ExperimentConfig
    rows: List[SummaryRow]
    pairs: List[PairResult]
    densities: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def column(self, name: str, **match) -> np.ndarray:
        """Values of one summary column for rows matching ``match``."""
        rows = [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]
        return np.array([getattr(r, name) for r in rows], dtype=float)


def _checksum(amplitudes) -> str:
    return hashlib.sha256(np.ascontiguousarray(amplitudes).tobytes()).hexdigest()


def run_points(config: ExperimentConfig, points: Sequence[Tuple[float, int, float]]) -> List[PairResult]:
    """Run every ``(sigma, d, h)`` point as a barrier/free pair.

    Results come back in the order of ``points``. Points sharing a sigma
    share one free reference run.
    """
    config.validate()
    grid = config.grid
    free_stepper = build_stepper(grid, np.zeros(grid.n_sites), config.dt)
    by_sigma: Dict[float, list] = {}
    for i, (sigma, d, h) in enumerate(points):
        by_sigma.setdefault(float(sigma), []).append((i, int(d), float(h)))

    results: List[Optional[PairResult]] = [None] * len(points)
    for sigma, members in by_sigma.items():
        psi0 = gaussian_packet(grid, config.x0, sigma, config.k0)
        checksum = _checksum(psi0.amplitudes)
        jobs = [("free", None, free_stepper)]
        for i, d, h in members:
            barrier = SquareBarrier(config.barrier_start, d, h)
            stepper = build_stepper(grid, sample_potential(barrier, grid, config.k0), config.dt)
            jobs.append((i, barrier, stepper))
        log.info("sigma=%g: %d barrier runs, %d steps", sigma, len(members), config.n_steps)

        free_samples: Dict[int, object] = {}
        builders = {i: RecordBuilder(barrier, grid) for i, barrier, _ in jobs[1:]}

        # the free run goes first in the first batch; later batches reuse its samples
        chunks = [jobs[:BATCH_SIZE]] + [jobs[j:j + BATCH_SIZE] for j in range(BATCH_SIZE, len(jobs), BATCH_SIZE)]
        finals = {}
        for chunk in chunks:
            steppers = [s for _, _, s in chunk]

            def observe(step_index, psis, chunk=chunk):
                t = step_index * config.dt
                for (tag, _, _), psi in zip(chunk, psis):
                    if tag == "free":
                        free_samples[step_index] = psi
                for (tag, _, _), psi in zip(chunk, psis):
                    if tag != "free":
                        builders[tag].add(t, psi, free_samples[step_index])

            out = evolve_many(steppers, [psi0] * len(chunk), config.n_steps,
                              observer=observe, stride=config.stride)
            for (tag, _, _), psi in zip(chunk, out):
                finals[tag] = psi

        psi_free = finals["free"]
        dens_free = density(psi_free)
        for i, barrier, _ in jobs[1:]:
            record_flags = []
            psi_t = finals[i]
            dens_t = density(psi_t)
            builder = builders[i]
            lo, hi = transmitted_region(barrier, grid)
            record = builder.build()
            tn = record.final_transmitted_norm
            if tn < TRANSMISSION_FLOOR:
                record_flags.append(NO_TRANSMISSION)
            if len(record) >= 2 and tn > 0:
                steps_between = (record.times[-1] - record.times[-2]) / config.dt
                change = abs(record.transmitted_norm[-1] - record.transmitted_norm[-2]) / tn
                if steps_between > 0 and change * 100.0 / steps_between >= SETTLE_TOLERANCE:
                    record_flags.append(UNSETTLED)
            if not np.isfinite(record.final_shift):
                record_flags.append(NO_PEAK)
            elif record.max_transmitted[-1] - barrier.end_site < 5.0 * sigma:
                record_flags.append(NEAR_BARRIER)
            try:
                mean_k = momentum_distribution(psi_t, (lo, hi)).mean_positive_k
            except (NoPacketError, ValueError):
                mean_k = float("nan")
            record.flags = tuple(record_flags)
            results[i] = PairResult(
                sigma=sigma,
                d=barrier.width_d,
                h=barrier.height_ratio_h,
                record=record,
                density_tunneled=dens_t,
                density_free=dens_free,
                peak_amplitude=float(np.max(dens_t[lo:hi])) if hi > lo else 0.0,
                mean_k_transmitted=mean_k,
                initial_checksum=checksum,
                flags=tuple(record_flags),
            )
    return results


def run_pair(config: ExperimentConfig, sigma=None, d=None, h=None) -> PairResult:
    """Barrier run and free reference for one parameter point.

    Unspecified parameters come from the first entry of the config's axes.
    """
    point = (
        config.sigmas[0] if sigma is None else sigma,
        config.d_values[0] if d is None else d,
        config.h_values[0] if h is None else h,
    )
    return run_points(config, [point])[0]


def summary_row(pair: PairResult, config: ExperimentConfig) -> SummaryRow:
    rec = pair.record
    return SummaryRow(
        sigma=pair.sigma,
        d=pair.d,
        h=pair.h,
        snapshot_time=config.snapshot_time,
        max_free=float(rec.max_free[-1]),
        max_transmitted=float(rec.max_transmitted[-1]),
        shift=pair.shift,
        transmitted_norm=pair.transmitted_norm,
        flags=pair.flags,
        peak_amplitude=pair.peak_amplitude,
        mean_k_transmitted=pair.mean_k_transmitted,
        envelope_violation=rec.envelope_violation,
        reflected_norm=float(rec.reflected_norm[-1]),
    )


def _label(prefix, value) -> str:
    return f"{prefix}{value:g}"


def _sweep(name, config, points, label_of=None) -> ExperimentResult:
    pairs = run_points(config, points)
    rows = sorted((summary_row(p, config) for p in pairs), key=lambda r: r.key)
    densities: Dict[str, np.ndarray] = {}
    if label_of is not None:
        densities["free"] = pairs[0].density_free
        for p in pairs:
            densities[label_of(p)] = p.density_tunneled
    return ExperimentResult(name=name, config=config, rows=rows, pairs=pairs, densities=densities)


def snapshot_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Several barrier widths at one height, all at a common snapshot time."""
    if not config.d_values:
        raise ValueError("d_values must not be empty")
    sigma, h = config.sigmas[0], config.h_values[0]
    points = [(sigma, d, h) for d in config.d_values]
    return _sweep("snapshot", config, points, label_of=lambda p: _label("d", p.d))


def height_sweep(config: ExperimentConfig) -> ExperimentResult:
    """Several barrier heights at one width."""
    if not config.h_values:
        raise ValueError("h_values must not be empty")
    sigma, d = config.sigmas[0], config.d_values[0]
    points = [(sigma, d, h) for h in config.h_values]
    return _sweep("height-sweep", config, points, label_of=lambda p: _label("h", p.h))


def width_scan(config: ExperimentConfig) -> ExperimentResult:
    """Full cross product of packet widths and barrier widths at one height."""
    if not config.d_values or not config.sigmas:
        raise ValueError("d_values and sigma_values must not be empty")
    h = config.h_values[0]
    points = [(s, d, h) for s in config.sigmas for d in config.d_values]
    return _sweep("width-scan", config, points)
