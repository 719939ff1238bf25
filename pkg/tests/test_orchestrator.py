"""Engine replay: tick schedule, determinism, pacing, error containment."""

import hashlib
import json
import time
from pathlib import Path

import pytest

from workpulse.errors import ConfigError
from workpulse.orchestrator import Engine, EngineConfig
from workpulse.tracegen import build_day_trace, day_mock_rules

from helpers import write_trace

HIGH_LINE = "[presenting slides | In_Meeting | High | conference room]"
LOW_LINE = "[sipping water | Other | Low | desk]"


def engine_for(tmp_path, trace, rules=None, tag="out", **config_kw):
    rules_path = tmp_path / f"{tag}-rules.json"
    rules_path.write_text(json.dumps(rules if rules is not None else day_mock_rules()))
    out = tmp_path / tag
    config = EngineConfig(mock_rules=str(rules_path),
                          store_dir=str(out / "store"),
                          outbox_dir=str(out / "outbox"),
                          summary_path=str(out / "summary.json"),
                          **config_kw)
    return Engine(config), out


def simple_hour_trace(tmp_path, insight_line=HIGH_LINE, caption="cap-steady"):
    # frames every 60 s over one hour, sparse ECG so physio is simply invalid
    frames = [{"ts_ms": t * 60_000.0, "caption": caption} for t in range(60)]
    ecg = [(t * 5.0, 0.0) for t in range(10)]
    rules = [
        {"matcher": caption, "response": insight_line, "priority": 5},
        {"matcher": "workplace wellness assistant",
         "response": json.dumps({"Analysis": "a", "Interventions":
                                 {"Immediate Action": "b", "Follow-Up": "c"}}),
         "priority": 1},
    ]
    trace = write_trace(tmp_path / "trace", frames=frames, ecg=ecg,
                        session_start="2024-06-03T09:00:00")
    # span must reach the final boundary for the last row to seal
    (trace / "imu.csv").write_text("timestamp_ms,ax,ay,az\n3600000.0,0,0,9.81\n")
    return trace, rules


def test_one_hour_trace_seals_four_rows(tmp_path):
    trace, rules = simple_hour_trace(tmp_path)
    engine, _ = engine_for(tmp_path, trace, rules)
    summary = engine.replay(trace)
    assert summary["rows_sealed"] == 4
    assert summary["ticks"]["routine"] == 4


def test_high_criticality_throughout_blocks_every_delivery(tmp_path):
    trace, rules = simple_hour_trace(tmp_path, insight_line=HIGH_LINE)
    engine, _ = engine_for(tmp_path, trace, rules)
    summary = engine.replay(trace)
    # scenario oracle from the gating rules: 4 generations, zero deliveries
    assert summary["ticks"]["intervention"] == 4
    assert summary["interventions"]["delivered"] == 0
    assert summary["interventions"]["blocked"] + summary["interventions"]["expired"] == 4


def test_low_criticality_delivers_each_interval(tmp_path):
    trace, rules = simple_hour_trace(tmp_path, insight_line=LOW_LINE)
    engine, _ = engine_for(tmp_path, trace, rules)
    summary = engine.replay(trace)
    assert summary["interventions"]["delivered"] == 4


def digest_tree(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_replay_twice_is_byte_identical(tmp_path):
    trace_dir = tmp_path / "day"
    build_day_trace(trace_dir, hours=0.5, seed=3)
    rules = json.loads((trace_dir / "mock_rules.json").read_text())
    outs = []
    for tag in ("a", "b"):
        engine, out = engine_for(tmp_path, trace_dir, rules, tag=tag)
        engine.replay(trace_dir)
        outs.append(digest_tree(out))
    assert outs[0] == outs[1]


def test_paced_replay_wall_time_tracks_speed_factor(tmp_path):
    # pacing law: wall time ~= virtual span / speed factor
    frames = [{"ts_ms": t * 10_000.0, "caption": "cap-steady"} for t in range(13)]
    rules = [{"matcher": "cap-steady", "response": LOW_LINE, "priority": 5},
             {"matcher": "workplace wellness assistant",
              "response": json.dumps({"Analysis": "a", "Interventions":
                                      {"Immediate Action": "b", "Follow-Up": "c"}}),
              "priority": 1}]
    trace = write_trace(tmp_path / "trace", frames=frames)
    engine, out_paced = engine_for(tmp_path, trace, rules, tag="paced",
                                   speed_factor=60.0, frame_cadence_s=10.0,
                                   routine_interval_s=60.0)
    start = time.monotonic()
    engine.replay(trace, pace=True)
    wall = time.monotonic() - start
    assert 120.0 / 60.0 * 0.5 <= wall <= 120.0 / 60.0 * 2.0 + 0.5

    # pacing changes only wall time, never output bytes
    fast, out_fast = engine_for(tmp_path, trace, rules, tag="fast",
                                speed_factor=60.0, frame_cadence_s=10.0,
                                routine_interval_s=60.0)
    fast.replay(trace)
    assert digest_tree(out_paced) == digest_tree(out_fast)


def test_unpaced_replay_ignores_speed_factor(tmp_path):
    trace, rules = simple_hour_trace(tmp_path)
    engine, _ = engine_for(tmp_path, trace, rules, speed_factor=1.0)
    start = time.monotonic()
    engine.replay(trace)
    assert time.monotonic() - start < 10.0


def test_tick_error_contained_and_replay_continues(tmp_path):
    # second caption has no mock rule: that frame tick errors, the rest proceed
    frames = [{"ts_ms": 0.0, "caption": "cap-steady"},
              {"ts_ms": 60_000.0, "image_ref": "img-1"},
              {"ts_ms": 120_000.0, "caption": "cap-steady"}]
    rules = [{"matcher": "cap-steady", "response": LOW_LINE, "priority": 5},
             {"matcher": "workplace wellness assistant",
              "response": json.dumps({"Analysis": "a", "Interventions":
                                      {"Immediate Action": "b", "Follow-Up": "c"}}),
              "priority": 1}]
    trace = write_trace(tmp_path / "trace", frames=frames)
    (trace / "imu.csv").write_text("timestamp_ms,ax,ay,az\n900000.0,0,0,9.81\n")
    engine, _ = engine_for(tmp_path, trace, rules)
    summary = engine.replay(trace)
    frame_ticks = [t for t in engine.ticks if t.pipeline == "frame"]
    assert len(frame_ticks) == 3
    assert sum(1 for t in frame_ticks if t.outcome.startswith("error")) == 1
    assert summary["rows_sealed"] == 1


def test_fractional_timestamp_just_below_boundary_stays_in_row(tmp_path):
    frames = [{"ts_ms": 0.0, "caption": "cap-steady"},
              {"ts_ms": 899_999.5, "caption": "cap-steady"},
              {"ts_ms": 900_000.0, "caption": "cap-steady"}]
    rules = [{"matcher": "cap-steady", "response": LOW_LINE, "priority": 5},
             {"matcher": "workplace wellness assistant",
              "response": json.dumps({"Analysis": "a", "Interventions":
                                      {"Immediate Action": "b", "Follow-Up": "c"}}),
              "priority": 1}]
    trace = write_trace(tmp_path / "trace", frames=frames)
    (trace / "imu.csv").write_text("timestamp_ms,ax,ay,az\n1800000.0,0,0,9.81\n")
    engine, _ = engine_for(tmp_path, trace, rules)
    engine.replay(trace)
    assert all(not t.outcome.startswith("error") for t in engine.ticks)
    first, second = engine.routine.rows
    # 0.0 gets a full cadence, 899999.5 only the half-millisecond left in row 1
    assert first.minutes["other"] == pytest.approx(1.0 + 0.5 / 60_000.0)
    assert second.minutes["other"] == pytest.approx(1.0)


def test_summary_written_to_disk(tmp_path):
    trace, rules = simple_hour_trace(tmp_path)
    engine, out = engine_for(tmp_path, trace, rules)
    summary = engine.replay(trace)
    on_disk = json.loads((out / "summary.json").read_text())
    assert on_disk == summary


# -- configuration -----------------------------------------------------------------


def test_config_requires_interval_multiple():
    with pytest.raises(ConfigError):
        EngineConfig(frame_cadence_s=60.0, routine_interval_s=100.0)


def test_config_requires_positive_speed():
    with pytest.raises(ConfigError):
        EngineConfig(speed_factor=0.0)


def test_config_from_file_rejects_unknown_keys(tmp_path):
    path = tmp_path / "config.json"
    path.write_text('{"speed_factor": 2.0, "bogus": 1}')
    with pytest.raises(ConfigError):
        EngineConfig.from_file(path)
    path.write_text('{"speed_factor": 2.0}')
    assert EngineConfig.from_file(path).speed_factor == 2.0


def test_config_needs_a_backend():
    with pytest.raises(ConfigError):
        Engine(EngineConfig())
