"""Command-line interface: subcommands, exit codes, and trace export."""

import csv
import os

import numpy as np
import pytest

from quadsafe.cli import TRACE_HEADER, main

TINY_SCENARIO = """\
run: {duration_s: 0.2, dt_s: 0.001}
filters: {high: true, low: false}
barriers:
  - {domain: altitude_position, c_z_m: 0.0, p_z_m: 2.0}
"""


@pytest.fixture
def tiny_file(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text(TINY_SCENARIO)
    return str(p)


class TestSubcommands:
    def test_presets_lists_names(self, capsys):
        assert main(["presets"]) == 0
        out = capsys.readouterr().out
        for name in ("fig4-altitude", "fig5-lateral-pos", "fig6-velocity-switch",
                     "fig7-unified", "stress-infeasible"):
            assert name in out

    def test_check_valid_file(self, tiny_file, capsys):
        assert main(["check", tiny_file]) == 0
        assert "ok" in capsys.readouterr().out

    def test_check_preset_syntax(self):
        assert main(["check", "presets:fig4-altitude"]) == 0

    def test_check_unknown_preset(self, capsys):
        assert main(["check", "presets:nope"]) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_file(self, capsys):
        assert main(["check", "/does/not/exist.yaml"]) == 1

    def test_invalid_scenario_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("run: {duration_s: -5.0}\n")
        assert main(["run", str(bad)]) == 1

    def test_oracle_subcommand(self, capsys):
        assert main(["oracle", "--states", "5"]) == 0
        assert "PASS" in capsys.readouterr().out


class TestRunExport:
    def test_run_writes_trace_files(self, tiny_file, tmp_path):
        out = str(tmp_path / "out")
        assert main(["run", tiny_file, "--out", out]) == 0
        for fname in ("trace.csv", "events.csv", "summary.txt"):
            assert os.path.exists(os.path.join(out, fname))

    def test_trace_csv_layout(self, tiny_file, tmp_path):
        out = str(tmp_path / "out")
        main(["run", tiny_file, "--out", out])
        with open(os.path.join(out, "trace.csv")) as f:
            reader = csv.reader(f)
            header = next(reader)
            assert header == TRACE_HEADER.split(",")
            rows = list(reader)
        assert len(rows) == 200
        first = rows[0]
        assert float(first[0]) == 0.0
        # Altitude barrier column populated, lateral columns empty.
        cols = dict(zip(header, first))
        assert cols["h_alt"] != ""
        assert cols["h_latpos"] == ""
        assert cols["qp_hi_status"] == "optimal"
        # Every numeric field round-trips as a finite float.
        for name in header[:24]:
            if cols[name] != "":
                assert np.isfinite(float(cols[name]))

    def test_summary_reports_barrier_minimum(self, tiny_file, tmp_path):
        out = str(tmp_path / "out")
        main(["run", tiny_file, "--out", out])
        text = open(os.path.join(out, "summary.txt")).read()
        assert "barrier altitude_position" in text
        assert "min_h=" in text
        assert "infeasible_steps:" in text

    def test_dt_override(self, tiny_file, tmp_path):
        out = str(tmp_path / "out")
        assert main(["run", tiny_file, "--out", out, "--dt", "0.002"]) == 0
        n = sum(1 for _ in open(os.path.join(out, "trace.csv"))) - 1
        assert n == 100

    def test_bad_dt_rejected(self, tiny_file, tmp_path, capsys):
        assert main(["run", tiny_file, "--out", str(tmp_path), "--dt", "-1"]) == 1

    def test_nonzero_seed_rejected(self, tiny_file, tmp_path, capsys):
        assert main(["run", tiny_file, "--out", str(tmp_path), "--seed", "7"]) == 1

    def test_events_csv_has_header(self, tiny_file, tmp_path):
        out = str(tmp_path / "out")
        main(["run", tiny_file, "--out", out])
        lines = open(os.path.join(out, "events.csv")).read().splitlines()
        assert lines[0] == "t,event_type,detail"
