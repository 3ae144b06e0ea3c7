import json

import pytest

from nullit import cli


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_infer_json_motivating_example(capsys):
    code, out, _ = _run(capsys, "infer", "corpus/escape.nir", "--opt",
                        "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["annotations"]["fields"]["C.f"] == "@NonNull"
    assert doc["annotations"]["returns"]["C.m/1"] == "@Nullable"
    assert doc["annotations"]["params"]["C.m/1"]["0"].startswith("@Raw")


def test_infer_text_with_stats(capsys):
    code, out, _ = _run(capsys, "infer", "corpus/fullinit.nir", "--stats")
    assert code == 0
    assert "field  C.f: @NonNull" in out
    assert "non-null (100.0%)" in out
    assert "safe (100.0%)" in out


def test_infer_reports_are_deterministic(capsys):
    _, a, _ = _run(capsys, "infer", "corpus/guard03.nir", "--format", "json",
                   "--stats")
    _, b, _ = _run(capsys, "infer", "corpus/guard03.nir", "--format", "json",
                   "--stats")
    # wall time may differ; strip it before comparing
    da, db = json.loads(a), json.loads(b)
    da["stats"].pop("wall_seconds")
    db["stats"].pop("wall_seconds")
    da["stats"].pop("peak_mb")
    db["stats"].pop("peak_mb")
    assert da == db


def test_infer_syntax_error_diagnostic(tmp_path, capsys):
    bad = tmp_path / "bad.nir"
    bad.write_text("class A extends Object {\n  wat\n}\n")
    code, _, err = _run(capsys, "infer", str(bad))
    assert code == 1
    assert "line 2" in err


def test_infer_missing_file(capsys):
    code, _, err = _run(capsys, "infer", "no/such/file.nir")
    assert code == 1
    assert "error" in err


def test_run_trace_format(capsys):
    code, out, _ = _run(capsys, "run", "corpus/fullinit.nir", "--trace")
    assert code == 0
    lines = out.splitlines()
    assert any(line.startswith("C.main:0 new |") for line in lines)
    assert any("heap C.f <-" in line for line in lines)
    assert "status: returned" in out


def test_check_command(capsys):
    code, out, _ = _run(capsys, "check", "corpus/escape.nir", "--runs", "3")
    assert code == 0
    assert "fixpoint engines agree" in out


def test_fuzz_small_range_clean(capsys):
    code, out, _ = _run(capsys, "fuzz", "--seeds", "0..4", "--runs", "2",
                        "--budget", "300")
    assert code == 0
    assert "0 violations" in out


def test_fuzz_empty_range(capsys):
    code, out, _ = _run(capsys, "fuzz", "--seeds", "5..5")
    assert code == 0
    assert "0 programs" in out


def test_fuzz_fault_injection_detected(capsys):
    code, out, _ = _run(capsys, "fuzz", "--seeds", "0..3", "--runs", "4",
                        "--budget", "400", "--inject-fault", "lower-heap")
    assert code != 0
    assert "detected" in out


def test_budget_env_var(capsys, monkeypatch):
    monkeypatch.setenv("NULLIT_BUDGET", "7")
    code, out, _ = _run(capsys, "run", "corpus/fullinit.nir")
    assert code == 0
    assert "steps: 7" in out
