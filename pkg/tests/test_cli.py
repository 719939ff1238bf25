"""Command line entry points: exit codes and emitted artifacts."""

import json

import pytest

from workpulse.cli import main
from workpulse.tracegen import build_day_trace

from helpers import write_trace


@pytest.fixture
def day_trace(tmp_path):
    trace = tmp_path / "trace"
    build_day_trace(trace, hours=0.25, seed=11)
    return trace


def test_validate_trace_ok(day_trace, capsys):
    assert main(["validate-trace", str(day_trace)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["span_ms"] == 900_000.0
    assert report["events"]["frame"] == 15


def test_validate_trace_bad_schema(tmp_path, capsys):
    trace = write_trace(tmp_path / "bad", ecg=[(0, 0.1), (5, 0.1), (4, 0.1)])
    assert main(["validate-trace", str(trace)]) == 2
    assert "invalid trace" in capsys.readouterr().err


def test_run_replays_and_prints_summary(day_trace, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    code = main(["run", "--replay", str(day_trace),
                 "--mock-llm", str(day_trace / "mock_rules.json")])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["rows_sealed"] == 1
    assert (tmp_path / "out" / "summary.json").exists()
    assert (tmp_path / "out" / "store" / "snapshot.json").exists()


def test_run_bad_config_exits_nonzero(day_trace, tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text('{"speed_factor": -1}')
    code = main(["run", "--config", str(config), "--replay", str(day_trace)])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_run_missing_backend_exits_nonzero(day_trace, capsys):
    code = main(["run", "--replay", str(day_trace)])
    assert code == 1
    assert "mock_rules or live_url" in capsys.readouterr().err
