"""CSV and JSON serialization of densities, summaries and run manifests.

Floats are written with 17 significant digits (exact round trip for
doubles), ``.`` as decimal separator and ``\\n`` line endings regardless of
platform or locale.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np

from . import __version__

__all__ = [
    "SUMMARY_COLUMNS",
    "DIAGNOSTIC_COLUMNS",
    "format_float",
    "write_density_csv",
    "read_density_csv",
    "write_summary_csv",
    "read_summary_csv",
    "write_record_csv",
    "write_run_manifest",
    "file_sha256",
]

SUMMARY_COLUMNS = (
    "sigma",
    "d",
    "h",
    "snapshot_time",
    "max_free",
    "max_transmitted",
    "shift",
    "transmitted_norm",
    "flags",
)
DIAGNOSTIC_COLUMNS = (
    "sigma",
    "d",
    "h",
    "peak_amplitude",
    "mean_k_transmitted",
    "envelope_violation",
    "reflected_norm",
)
RECORD_COLUMNS = (
    "time",
    "max_free",
    "max_transmitted",
    "shift",
    "transmitted_norm",
    "reflected_norm",
    "barrier_norm",
)

PathLike = Union[str, Path]


def format_float(value) -> str:
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def _open_for_write(path: PathLike):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="ascii")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_density_csv(path: PathLike, grid, columns: Union[Mapping[str, np.ndarray], Sequence[Tuple[str, np.ndarray]]]) -> None:
    """Write labeled density arrays as ``site,<label1>,<label2>,...``."""
    items = list(columns.items()) if isinstance(columns, Mapping) else list(columns)
    n = grid.n_sites if hasattr(grid, "n_sites") else int(grid)
    arrays = []
    for label, values in items:
        values = np.asarray(values, dtype=float)
        if values.shape != (n,):
            raise ValueError(f"column {label!r} has shape {values.shape}, expected ({n},)")
        arrays.append(values)
    with _open_for_write(path) as fh:
        w = _writer(fh)
        w.writerow(["site"] + [label for label, _ in items])
        for j in range(n):
            w.writerow([str(j)] + [format_float(a[j]) for a in arrays])


def read_density_csv(path: PathLike) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[0] != "site":
        raise ValueError(f"{path}: not a density file")
    sites = np.array([int(r[0]) for r in body], dtype=int)
    data = np.array([[float(v) for v in r[1:]] for r in body], dtype=float).reshape(len(body), len(header) - 1)
    return sites, {label: data[:, i] for i, label in enumerate(header[1:])}


def _cell(value) -> str:
    if isinstance(value, (tuple, list)):
        return ";".join(value)
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format_float(value)


def write_summary_csv(path: PathLike, rows: Iterable, columns: Sequence[str] = SUMMARY_COLUMNS) -> None:
    """Write summary rows sorted by ``(sigma, d, h)``.

    Rows may be objects with attributes or mappings named after ``columns``.
    """

    def get(row, name):
        return row[name] if isinstance(row, Mapping) else getattr(row, name)

    rows = sorted(rows, key=lambda r: (float(get(r, "sigma")), int(get(r, "d")), float(get(r, "h"))))
    with _open_for_write(path) as fh:
        w = _writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(get(r, c)) for c in columns])


def read_summary_csv(path: PathLike) -> List[dict]:
    with open(path, newline="", encoding="ascii") as fh:
        return list(csv.DictReader(fh))


def write_record_csv(path: PathLike, record) -> None:
    """Time series of one run's observables."""
    with _open_for_write(path) as fh:
        w = _writer(fh)
        w.writerow(RECORD_COLUMNS)
        cols = [record.times, record.max_free, record.max_transmitted, record.shift,
                record.transmitted_norm, record.reflected_norm, record.barrier_norm]
        for i in range(len(record)):
            w.writerow([format_float(c[i]) for c in cols])


def file_sha256(path: PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_run_manifest(path: PathLike, config: Mapping, files: Iterable[PathLike], extra: Mapping = None) -> dict:
    """Write a JSON manifest with the effective config and file checksums.

    ``files`` are hashed as they are on disk now, so the manifest must be
    written last. Only the ``created`` field differs between repeated runs.
    """
    path = Path(path)
    checksums = {}
    for f in files:
        f = Path(f)
        checksums[f.name] = file_sha256(f)
    manifest = {
        "tool": "wavetunnel",
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": dict(config),
        "files": dict(sorted(checksums.items())),
    }
    if extra:
        manifest.update(extra)
    with _open_for_write(path) as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
