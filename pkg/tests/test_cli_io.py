import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavetunnel.cli import CliInvocation, UsageError, execute, main, parse_invocation
from wavetunnel.experiments import SummaryRow, default_config
from wavetunnel.io import (
    SUMMARY_COLUMNS,
    file_sha256,
    format_float,
    read_density_csv,
    read_summary_csv,
    write_density_csv,
    write_run_manifest,
    write_summary_csv,
)
from wavetunnel.state import Grid

# a grid small enough for sub-second CLI runs
SMALL_ARGS = ["--grid-size", "1024", "--x0", "300", "--sigma", "8", "--k0", "0.6",
              "--barrier-start", "450", "--steps", "4000", "--stride", "500"]


# -- serialization ---------------------------------------------------------

def test_density_csv_line_count(tmp_path):
    path = tmp_path / "d.csv"
    write_density_csv(path, Grid(3), {"free": np.array([0.1, 0.2, 0.3])})
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    assert lines[0] == "site,free"
    assert lines[2] == "1,0.20000000000000001"


def test_density_csv_round_trip_is_byte_identical(tmp_path, rng):
    grid = Grid(50)
    cols = [("free", rng.random(50)), ("d5", rng.random(50) * 1e-30), ("d10", np.zeros(50))]
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    write_density_csv(a, grid, cols)
    sites, data = read_density_csv(a)
    np.testing.assert_array_equal(sites, np.arange(50))
    for label, values in cols:
        np.testing.assert_array_equal(data[label], values)
    write_density_csv(b, grid, data)
    assert a.read_bytes() == b.read_bytes()


def test_density_csv_rejects_wrong_length(tmp_path):
    with pytest.raises(ValueError, match="free"):
        write_density_csv(tmp_path / "x.csv", Grid(4), {"free": np.zeros(3)})


def test_density_csv_io_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        write_density_csv(blocker / "sub" / "d.csv", Grid(3), {"free": np.zeros(3)})


@given(st.floats(allow_nan=True, allow_infinity=True))
@settings(max_examples=200, deadline=None)
def test_format_float_round_trips(x):
    text = format_float(x)
    assert "," not in text and " " not in text
    y = float(text)
    assert (np.isnan(x) and np.isnan(y)) or y == x


def _row(sigma, d, h, flags=()):
    return SummaryRow(sigma=sigma, d=d, h=h, snapshot_time=100.0, max_free=1.0,
                      max_transmitted=2.0, shift=1.0, transmitted_norm=0.5, flags=flags)


def test_summary_csv_empty_table(tmp_path):
    path = tmp_path / "s.csv"
    write_summary_csv(path, [])
    assert path.read_text() == ",".join(SUMMARY_COLUMNS) + "\n"


def test_summary_csv_sorted_and_flagged(tmp_path):
    path = tmp_path / "s.csv"
    rows = [_row(20.0, 2, 2.0), _row(10.0, 30, 2.0), _row(10.0, 4, 2.0, ("no_transmission",)),
            _row(10.0, 4, 1.5, ("unsettled", "near_barrier"))]
    write_summary_csv(path, rows)
    table = read_summary_csv(path)
    assert [(r["sigma"], r["d"], r["h"]) for r in table] == [
        ("10", "4", "1.5"), ("10", "4", "2"), ("10", "30", "2"), ("20", "2", "2")]
    assert table[1]["flags"] == "no_transmission"
    assert table[0]["flags"] == "unsettled;near_barrier"
    assert table[2]["flags"] == ""


def test_summary_csv_accepts_mappings(tmp_path):
    path = tmp_path / "s.csv"
    write_summary_csv(path, [{"sigma": 1.0, "d": 2, "h": 3.0}], columns=("sigma", "d", "h"))
    assert path.read_text() == "sigma,d,h\n1,2,3\n"


def test_manifest_contents_and_checksums(tmp_path):
    f = tmp_path / "summary.csv"
    write_summary_csv(f, [_row(10.0, 4, 2.0)])
    m = write_run_manifest(tmp_path / "manifest.json", default_config().to_dict(), [f])
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == m
    assert on_disk["config"]["dt"] == 0.05 and on_disk["config"]["k0"] == 0.5
    assert on_disk["files"]["summary.csv"] == file_sha256(f)
    assert on_disk["tool"] == "wavetunnel" and "version" in on_disk and "created" in on_disk


# -- command line ----------------------------------------------------------

def test_snapshot_invocation_sets_fields():
    inv = parse_invocation(["snapshot", "--sigma", "10", "--barrier-start", "6000", "--d-list", "5,10,15,20"])
    cfg = inv.config
    assert inv.subcommand == "snapshot"
    assert (cfg.sigma, cfg.barrier_start, cfg.d_values) == (10.0, 6000, (5, 10, 15, 20))
    assert cfg.h_values == (2.0,)


def test_no_arguments_is_usage_error(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv, field",
    [
        (["single-run", "--sigma", "-1"], "sigma"),
        (["single-run", "--sigma", "abc"], "sigma"),
        (["single-run", "--d-list", "5,,6"], "d-list"),
        (["single-run", "--barrier-start", "20000"], "barrier_start"),
        (["single-run", "--steps", "1.5"], "steps"),
        (["single-run", "--snapshot-time", "-3"], "snapshot-time"),
    ],
)
def test_bad_values_name_field(argv, field, capsys):
    with pytest.raises(UsageError, match=field):
        parse_invocation(argv)
    assert main(argv) == 1
    assert field in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["single-run", "--bogus", "1"], ["teleport"],
                                  ["single-run", "--steps", "10", "--snapshot-time", "5"]])
def test_unknown_or_conflicting_flags(argv):
    with pytest.raises(UsageError):
        parse_invocation(argv)


def test_priority_flags_over_file_over_defaults(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sigma": 12, "k0": 0.3, "d-list": [4, 8]}))
    inv = parse_invocation(["snapshot", "--config", str(cfg), "--k0", "0.25"])
    assert inv.config.sigma == 12.0
    assert inv.config.k0 == 0.25
    assert inv.config.d_values == (4, 8)
    assert inv.config.n_steps == 50000  # subcommand default


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"sigmaa": 3}))
    with pytest.raises(UsageError, match="sigmaa"):
        parse_invocation(["single-run", "--config", str(bad)])
    bad.write_text("{not json")
    with pytest.raises(UsageError, match="config"):
        parse_invocation(["single-run", "--config", str(bad)])
    with pytest.raises(UsageError, match="config"):
        parse_invocation(["single-run", "--config", str(tmp_path / "missing.json")])


def test_snapshot_time_sets_steps():
    inv = parse_invocation(["single-run", "--snapshot-time", "100", "--dt", "0.1"])
    assert inv.config.n_steps == 1000


def test_output_dir_resolution(monkeypatch, tmp_path):
    monkeypatch.delenv("WAVETUNNEL_OUTPUT_DIR", raising=False)
    assert parse_invocation(["width-scan"]).output_dir == Path("wavetunnel-output") / "width-scan"
    monkeypatch.setenv("WAVETUNNEL_OUTPUT_DIR", str(tmp_path))
    assert parse_invocation(["width-scan"]).output_dir == tmp_path
    assert parse_invocation(["width-scan", "--output-dir", "x"]).output_dir == Path("x")


@pytest.mark.parametrize("sub", ["single-run", "snapshot", "height-sweep", "width-scan"])
def test_parse_echo_parse_is_idempotent(tmp_path, sub):
    first = parse_invocation([sub, "--sigma", "12", "--h-list", "1.5,3", "--output-dir", str(tmp_path)])
    path = tmp_path / "echo.json"
    path.write_text(json.dumps(first.echo()))
    second = parse_invocation([sub, "--config", str(path)])
    assert second.config == first.config
    assert second.output_dir == first.output_dir
    assert second.echo() == first.echo()


def test_single_run_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["single-run", *SMALL_ARGS, "--d-list", "6", "--h-list", "1.5", "--output-dir", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["config.json", "densities.csv", "diagnostics.csv", "manifest.json", "record.csv", "summary.csv"]
    manifest = json.loads((out / "manifest.json").read_text())
    # the manifest names every other file with its checksum
    assert sorted(manifest["files"]) == [n for n in names if n != "manifest.json"]
    for name, digest in manifest["files"].items():
        assert file_sha256(out / name) == digest
    assert manifest["config"]["dt"] == 0.05 and manifest["config"]["k0"] == 0.6
    _, dens = read_density_csv(out / "densities.csv")
    assert list(dens) == ["free", "tunneled"]
    assert "shift=" in capsys.readouterr().out


def test_snapshot_labels_and_opaque_flag(tmp_path):
    out = tmp_path / "snap"
    argv = ["snapshot", *SMALL_ARGS, "--d-list", "5,10,15,20,40", "--h-list", "4", "--output-dir", str(out)]
    assert main(argv) == 0
    header = (out / "densities.csv").read_text().splitlines()[0]
    assert header == "site,free,d5,d10,d15,d20,d40"
    rows = read_summary_csv(out / "summary.csv")
    assert "no_transmission" in rows[-1]["flags"].split(";")


def test_boundary_contamination_exit_code(tmp_path, capsys):
    # a left-moving packet passes validation but runs into the left wall
    argv = ["single-run", "--grid-size", "1024", "--x0", "100", "--sigma", "8", "--k0", "-1.0",
            "--barrier-start", "450", "--steps", "4000", "--output-dir", str(tmp_path)]
    assert main(argv) == 2
    assert "boundary density" in capsys.readouterr().err


def test_execute_returns_result(tmp_path):
    inv = parse_invocation(["height-sweep", *SMALL_ARGS, "--d-list", "6", "--h-list", "0,2",
                            "--output-dir", str(tmp_path)])
    assert isinstance(inv, CliInvocation)
    result = execute(inv)
    assert [r.h for r in result.rows] == [0.0, 2.0]
    assert (tmp_path / "densities.csv").read_text().splitlines()[0] == "site,free,h0,h2"
