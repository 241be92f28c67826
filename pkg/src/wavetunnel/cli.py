"""Command-line entry point.

    wavetunnel single-run    [options]   one barrier run and its free reference
    wavetunnel snapshot      [options]   densities for several barrier widths
    wavetunnel height-sweep  [options]   shift versus barrier height
    wavetunnel width-scan    [options]   shift versus barrier width and packet width

Values come from, in increasing priority: built-in defaults for the
subcommand, a JSON ``--config`` file using the flag names as keys, and
command-line flags. The effective configuration is written to
``config.json`` in the output directory and can be fed back via
``--config``.

Exit codes: 0 success, 1 usage or validation error, 2 runtime error
(boundary contamination or numerical blow-up).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .experiments import (
    EXPERIMENT_DEFAULTS,
    ExperimentConfig,
    ExperimentResult,
    height_sweep,
    run_pair,
    snapshot_experiment,
    width_scan,
    summary_row,
)
from .io import (
    DIAGNOSTIC_COLUMNS,
    write_density_csv,
    write_record_csv,
    write_run_manifest,
    write_summary_csv,
)
from .propagator import BoundaryContaminationError, NumericalBlowUpError

__all__ = ["CliInvocation", "UsageError", "parse_invocation", "execute", "main"]

log = logging.getLogger("wavetunnel")

SUBCOMMANDS = ("single-run", "snapshot", "height-sweep", "width-scan")
OUTPUT_ENV = "WAVETUNNEL_OUTPUT_DIR"

# flag name -> (config field, parser)
_FIELDS = {
    "grid-size": ("n_sites", int),
    "x0": ("x0", float),
    "sigma": ("sigma", float),
    "k0": ("k0", float),
    "barrier-start": ("barrier_start", int),
    "d-list": ("d_values", "ints"),
    "h-list": ("h_values", "floats"),
    "sigma-list": ("sigma_values", "floats"),
    "dt": ("dt", float),
    "steps": ("n_steps", int),
    "stride": ("stride", int),
}
_EXTRA_KEYS = ("snapshot-time", "output-dir")


class UsageError(ValueError):
    """Invalid command line or configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass(frozen=True)
class CliInvocation:
    subcommand: str
    config: ExperimentConfig
    output_dir: Path
    config_path: Optional[Path] = None

    def echo(self) -> dict:
        """Effective configuration keyed by flag names (JSON-ready)."""
        out = {}
        for flag, (name, _) in _FIELDS.items():
            value = getattr(self.config, name)
            out[flag] = list(value) if isinstance(value, tuple) else value
        out["output-dir"] = str(self.output_dir)
        return out


def _int_list(text):
    return tuple(int(v) for v in _split(text))


def _float_list(text):
    return tuple(float(v) for v in _split(text))


def _split(text):
    parts = [p.strip() for p in str(text).split(",")]
    if not parts or any(p == "" for p in parts):
        raise ValueError(f"bad list {text!r}")
    return parts


def _coerce(flag, value):
    _, kind = _FIELDS[flag]
    try:
        if kind == "ints":
            if isinstance(value, (list, tuple)):
                return tuple(int(v) for v in value)
            return _int_list(value)
        if kind == "floats":
            if isinstance(value, (list, tuple)):
                return tuple(float(v) for v in value)
            return _float_list(value)
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        return kind(value)
    except (TypeError, ValueError):
        raise UsageError(f"{flag}: invalid value {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wavetunnel", description="Gaussian wave packet tunneling through square barriers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)
    helps = {
        "single-run": "one barrier run paired with its free reference",
        "snapshot": "transmitted densities for several barrier widths at a common time",
        "height-sweep": "shift versus barrier height ratio h",
        "width-scan": "shift versus barrier width d for several packet widths sigma",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        p.add_argument("--config", type=Path, help="JSON file keyed by flag names")
        p.add_argument("--output-dir", type=Path, help=f"output directory (default ${OUTPUT_ENV} or ./wavetunnel-output/<subcommand>)")
        p.add_argument("--grid-size", help="number of lattice sites")
        p.add_argument("--x0", help="initial packet center (sites)")
        p.add_argument("--sigma", help="initial std of |psi|^2 (sites)")
        p.add_argument("--sigma-list", help="comma-separated packet widths (width-scan)")
        p.add_argument("--k0", help="carrier wave number (1/site)")
        p.add_argument("--dt", help="time step")
        p.add_argument("--barrier-start", help="first barrier site")
        p.add_argument("--d-list", help="comma-separated barrier widths (sites)")
        p.add_argument("--h-list", help="comma-separated height ratios V0/E0")
        when = p.add_mutually_exclusive_group()
        when.add_argument("--steps", help="number of time steps")
        when.add_argument("--snapshot-time", help="final time (rounded to whole steps)")
        p.add_argument("--stride", help="observe every this many steps")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load_config_file(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"config: cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config: {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config: {path} must hold a JSON object")
    unknown = sorted(set(data) - set(_FIELDS) - set(_EXTRA_KEYS))
    if unknown:
        raise UsageError(f"config: unknown keys {', '.join(unknown)}")
    return data


def parse_invocation(argv: Sequence[str]) -> CliInvocation:
    """Resolve ``argv`` into a validated :class:`CliInvocation`.

    Raises
    ------
    UsageError
        Unknown subcommand or flag, malformed values, or a configuration
        that violates a constraint; the message names the offending field.
    """
    parser = build_parser()
    args = parser.parse_args(list(argv))
    if args.subcommand is None:
        raise UsageError("missing subcommand")

    values = {}
    file_values = _load_config_file(args.config) if args.config else {}
    cli_values = {flag: getattr(args, flag.replace("-", "_")) for flag in (*_FIELDS, *_EXTRA_KEYS)}
    cli_values = {k: v for k, v in cli_values.items() if v is not None}
    merged = {**file_values, **cli_values}
    if "steps" in cli_values and "snapshot-time" in file_values:
        merged.pop("snapshot-time")
    if "snapshot-time" in cli_values and "steps" in file_values:
        merged.pop("steps")
    if "steps" in merged and "snapshot-time" in merged:
        raise UsageError("steps: give either steps or snapshot-time, not both")

    for flag in _FIELDS:
        if flag in merged:
            values[_FIELDS[flag][0]] = _coerce(flag, merged[flag])
    base = {**EXPERIMENT_DEFAULTS[args.subcommand], **values}
    if "snapshot-time" in merged:
        try:
            t = float(merged["snapshot-time"])
        except (TypeError, ValueError):
            raise UsageError(f"snapshot-time: invalid value {merged['snapshot-time']!r}") from None
        dt = base.get("dt", ExperimentConfig.dt)
        if not t >= 0:
            raise UsageError("snapshot-time: must be non-negative")
        base["n_steps"] = int(round(t / dt))

    try:
        config = ExperimentConfig(**base).validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    out = merged.get("output-dir") or os.environ.get(OUTPUT_ENV) or Path("wavetunnel-output") / args.subcommand
    return CliInvocation(
        subcommand=args.subcommand,
        config=config,
        output_dir=Path(out),
        config_path=args.config,
    )


def _write_outputs(inv: CliInvocation, result: ExperimentResult, record=None) -> List[Path]:
    out = inv.output_dir
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "config.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(inv.echo(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)

    path = out / "summary.csv"
    write_summary_csv(path, result.rows)
    written.append(path)

    path = out / "diagnostics.csv"
    write_summary_csv(path, result.rows, columns=DIAGNOSTIC_COLUMNS)
    written.append(path)

    if result.densities:
        path = out / "densities.csv"
        write_density_csv(path, inv.config.grid, result.densities)
        written.append(path)
    if record is not None:
        path = out / "record.csv"
        write_record_csv(path, record)
        written.append(path)
    return written


def execute(inv: CliInvocation) -> ExperimentResult:
    """Run the experiment and write every output file plus the manifest."""
    cfg = inv.config
    record = None
    if inv.subcommand == "single-run":
        pair = run_pair(cfg)
        record = pair.record
        result = ExperimentResult(
            name="single-run",
            config=cfg,
            rows=[summary_row(pair, cfg)],
            pairs=[pair],
            densities={"free": pair.density_free, "tunneled": pair.density_tunneled},
        )
    elif inv.subcommand == "snapshot":
        result = snapshot_experiment(cfg)
    elif inv.subcommand == "height-sweep":
        result = height_sweep(cfg)
    else:
        result = width_scan(cfg)

    files = _write_outputs(inv, result, record)
    write_run_manifest(
        inv.output_dir / "manifest.json",
        config=cfg.to_dict(),
        files=files,
        extra={"subcommand": inv.subcommand},
    )
    return result


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        inv = parse_invocation(argv)
    except UsageError as exc:
        build_parser().print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.INFO if "-v" in argv or "--verbose" in argv else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        result = execute(inv)
    except (BoundaryContaminationError, NumericalBlowUpError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for row in result.rows:
        flags = ";".join(row.flags) or "-"
        print(f"sigma={row.sigma:g} d={row.d} h={row.h:g} shift={row.shift:.4f} "
              f"T={row.transmitted_norm:.6g} flags={flags}")
    print(f"wrote {inv.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
