"""Command line behavior: subcommands, exit codes, file outputs, config precedence."""

from __future__ import annotations

import csv
import json
import re

import numpy as np
import pytest

from hieralm import (
    TRACE_FIELDS,
    GridSpec,
    SolverConfig,
    build_instance,
    hierarchical_shift,
    load_problem,
    solve,
)
from hieralm.cli import main

SCI = r"-?\d\.\d{2}e[+-]\d{2,3}"


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGenGrid:
    def test_writes_loadable_instance(self, tmp_path, capsys):
        path = tmp_path / "grid.json"
        code, out, err = run_cli(
            capsys, "gen-grid", "--rows", "3", "--cols", "4", "--kappa", "0.5",
            "--out", str(path),
        )
        assert (code, err) == (0, "")
        p = load_problem(path)
        assert (p.n, p.m1, p.m2) == (34, 8, 4)
        doc = json.loads(path.read_text())
        assert doc["meta"]["kappa"] == 0.5

    def test_stdout_mode_emits_json(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "gen-grid", "--rows", "2", "--cols", "2")
        assert code == 0
        doc = json.loads(out)
        assert doc["format"] == "hieralm-problem"
        path = tmp_path / "echo.json"
        path.write_text(out)
        assert load_problem(path).n == 8

    def test_rejects_bad_shape(self, capsys):
        code, _, err = run_cli(capsys, "gen-grid", "--rows", "1", "--cols", "3")
        assert code == 1
        assert "rows must be >= 2" in err


class TestSolveCommand:
    def test_feasible_grid_exits_zero(self, capsys):
        code, out, err = run_cli(capsys, "solve", "--grid", "3x3")
        assert (code, err) == (0, "")
        assert out.splitlines()[0].split() == list(TRACE_FIELDS)
        assert "status: Converged" in out

    def test_table_uses_three_significant_digits(self, capsys):
        _, out, _ = run_cli(capsys, "solve", "--grid", "3x3")
        rows = out.splitlines()[1:-2]
        for row in rows:
            cells = row.split()
            assert re.fullmatch(r"\d+", cells[0])
            for cell in cells[1:]:
                assert re.fullmatch(SCI, cell), cell

    def test_out_flag_redirects_table(self, tmp_path, capsys):
        path = tmp_path / "table.txt"
        code, out, _ = run_cli(capsys, "solve", "--grid", "3x3", "--out", str(path))
        assert code == 0
        assert out == ""
        assert "status: Converged" in path.read_text()

    def test_trace_csv_round_trips_exactly(self, tmp_path, capsys):
        trace_path = tmp_path / "trace.csv"
        code, _, _ = run_cli(
            capsys, "solve", "--grid", "3x3", "--kappa", "0.5", "--trace", str(trace_path)
        )
        assert code == 0
        p, _ = build_instance(GridSpec(3, 3, kappa=0.5))
        report = solve(p, SolverConfig())
        with open(trace_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(report.trace)
        for row, rec in zip(rows, report.trace):
            assert int(row["k"]) == rec.k
            for name in TRACE_FIELDS[1:]:
                assert float(row[name]) == getattr(rec, name), name

    def test_problem_file_source(self, tmp_path, capsys):
        path = tmp_path / "inst.json"
        run_cli(capsys, "gen-grid", "--rows", "3", "--cols", "3", "--out", str(path))
        code, out, _ = run_cli(capsys, "solve", "--problem", str(path))
        assert code == 0
        assert "status: Converged" in out

    def test_max_iter_exit_code(self, capsys):
        code, out, _ = run_cli(
            capsys, "solve", "--grid", "3x3", "--kappa", "0.5", "--max-iter", "2"
        )
        assert code == 2
        assert "status: MaxIter" in out

    def test_divergence_exit_code(self, capsys):
        code, out, _ = run_cli(
            capsys, "solve", "--grid", "3x3", "--kappa", "0.5", "--mode", "standard-al"
        )
        assert code == 3
        assert "status: DivergenceSuspected" in out

    def test_requires_exactly_one_source(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "solve")
        assert code == 1
        assert "exactly one problem source" in err
        path = tmp_path / "inst.json"
        run_cli(capsys, "gen-grid", "--rows", "2", "--cols", "2", "--out", str(path))
        code, _, err = run_cli(
            capsys, "solve", "--problem", str(path), "--grid", "2x2"
        )
        assert code == 1
        assert "exactly one problem source" in err

    def test_kappa_requires_grid(self, tmp_path, capsys):
        path = tmp_path / "inst.json"
        run_cli(capsys, "gen-grid", "--rows", "2", "--cols", "2", "--out", str(path))
        code, _, err = run_cli(
            capsys, "solve", "--problem", str(path), "--kappa", "0.5"
        )
        assert code == 1
        assert "--kappa only applies" in err

    def test_bad_grid_shape_string(self, capsys):
        code, _, err = run_cli(capsys, "solve", "--grid", "20by20")
        assert code == 1
        assert "ROWSxCOLS" in err

    def test_missing_problem_file(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "solve", "--problem", str(tmp_path / "no.json"))
        assert code == 1
        assert "cannot read" in err

    def test_malformed_problem_file(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        code, _, err = run_cli(capsys, "solve", "--problem", str(path))
        assert code == 1
        assert "invalid JSON" in err


class TestConfigFile:
    def test_file_values_apply(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"max_iter": 2}))
        code, _, _ = run_cli(
            capsys, "solve", "--grid", "3x3", "--kappa", "0.5", "--config", str(cfg_path)
        )
        assert code == 2

    def test_flags_override_file(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"max_iter": 2}))
        code, _, _ = run_cli(
            capsys,
            "solve", "--grid", "3x3", "--kappa", "0.5",
            "--config", str(cfg_path), "--max-iter", "50",
        )
        assert code == 0

    def test_schedule_keys(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"sigma1_factor": 20.0, "eta_cap": 1e10}))
        code, _, _ = run_cli(
            capsys, "solve", "--grid", "3x3", "--kappa", "0.5", "--config", str(cfg_path)
        )
        assert code == 0

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"maxiter": 2}))
        code, _, err = run_cli(capsys, "solve", "--grid", "3x3", "--config", str(cfg_path))
        assert code == 1
        assert "unknown config keys: maxiter" in err

    def test_invalid_value_rejected(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"tau": 2.0}))
        code, _, err = run_cli(capsys, "solve", "--grid", "3x3", "--config", str(cfg_path))
        assert code == 1
        assert "tau must be in (0, 1)" in err

    def test_invalid_json_rejected(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text("{")
        code, _, err = run_cli(capsys, "solve", "--grid", "3x3", "--config", str(cfg_path))
        assert code == 1
        assert "invalid JSON" in err


class TestOracleCommand:
    def test_prints_summary_and_writes_json(self, tmp_path, capsys):
        out_path = tmp_path / "shift.json"
        code, out, _ = run_cli(
            capsys, "oracle", "--grid", "3x3", "--kappa", "0.5", "--out", str(out_path)
        )
        assert code == 0
        assert "norm_s1:" in out and "rank1:" in out
        doc = json.loads(out_path.read_text())
        p, _ = build_instance(GridSpec(3, 3, kappa=0.5))
        res = hierarchical_shift(p)
        assert np.allclose(doc["s1"], res.shift.s1, atol=1e-12)
        assert np.allclose(doc["s2"], res.shift.s2, atol=1e-12)
        assert doc["rank1"] == res.rank1

    def test_problem_file_source(self, tmp_path, capsys):
        path = tmp_path / "inst.json"
        run_cli(capsys, "gen-grid", "--rows", "2", "--cols", "3", "--out", str(path))
        code, out, _ = run_cli(capsys, "oracle", "--problem", str(path))
        assert code == 0
        assert "stage2_value:" in out


class TestShiftSweep:
    def test_default_sweep(self, capsys):
        code, out, _ = run_cli(capsys, "shift-sweep", "--grid", "3x3", "--kappa", "0.5")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "k,sigma1,sigma2,norm_s1,norm_s2,r1,r2"
        assert len(lines) == 27
        first = lines[1].split(",")
        last = lines[-1].split(",")
        assert float(first[1]) == 1.0
        # the approximation error shrinks along the schedule
        assert float(last[5]) < float(first[5])
        assert float(last[6]) < float(first[6])

    def test_count_flag_and_out_file(self, tmp_path, capsys):
        path = tmp_path / "sweep.csv"
        code, out, _ = run_cli(
            capsys, "shift-sweep", "--grid", "2x2", "--count", "5", "--out", str(path)
        )
        assert code == 0
        assert out == ""
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 6

    def test_rejects_nonpositive_count(self, capsys):
        code, _, err = run_cli(capsys, "shift-sweep", "--grid", "2x2", "--count", "0")
        assert code == 1
        assert "--count" in err


class TestCompare:
    def test_feasible_instance_matches_in_both_modes(self, capsys):
        code, out, _ = run_cli(capsys, "compare", "--grid", "3x3")
        assert code == 0
        assert "infeasibility-control" in out
        assert "standard-al" in out
        assert out.count("Converged") == 2

    def test_infeasible_instance_diverges_only_in_standard_mode(self, capsys):
        code, out, _ = run_cli(capsys, "compare", "--grid", "3x3", "--kappa", "0.5")
        assert code == 0
        assert "Converged" in out
        assert "DivergenceSuspected" in out

    def test_out_file(self, tmp_path, capsys):
        path = tmp_path / "cmp.txt"
        code, out, _ = run_cli(capsys, "compare", "--grid", "2x2", "--out", str(path))
        assert code == 0
        assert out == ""
        assert "iterations" in path.read_text()


class TestLogging:
    def test_unknown_level_warns_but_runs(self, capsys, caplog, monkeypatch):
        monkeypatch.setenv("HIERALM_LOG", "chatty")
        code, _, _ = run_cli(capsys, "solve", "--grid", "2x2")
        assert code == 0
        assert any("unknown HIERALM_LOG" in rec.message for rec in caplog.records)

    def test_debug_level_accepted(self, capsys, monkeypatch):
        monkeypatch.setenv("HIERALM_LOG", "debug")
        code, _, _ = run_cli(capsys, "solve", "--grid", "2x2")
        assert code == 0


class TestUsageErrors:
    def test_no_command(self, capsys):
        code, _, err = run_cli(capsys)
        assert code == 1
        assert "hieralm: error" in err

    def test_unknown_command(self, capsys):
        code, _, err = run_cli(capsys, "frobnicate")
        assert code == 1
