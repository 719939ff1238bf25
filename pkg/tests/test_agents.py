"""Task agents: transcription, action extraction, time resolution, dispatch."""

import json
from datetime import datetime, timedelta

import pytest

from workpulse.agents import (ActionItem, TaskAgentRunner, ToolRegistry,
                              HandlerDescriptor, resolve_relative_time)
from workpulse.errors import HandlerFailed, NoHandler, UnparseableActions
from workpulse.ingest import AudioSegment

from helpers import make_mock_gateway

SESSION_START = datetime(2024, 6, 3, 10, 0, 0)

EMAIL_ACTIONS = json.dumps([{
    "kind": "email",
    "recipient_hint": "the team",
    "subject": "Report summary",
    "body_draft": "Hi team, sharing the report summary.",
    "confidence": "explicit",
}])

CALENDAR_ACTIONS = json.dumps([{
    "kind": "calendar_event",
    "title": "Sync with Priya",
    "start": "tomorrow at 3pm",
    "duration_minutes": 30,
    "attendees_hint": "Priya",
    "confidence": "explicit",
}])


@pytest.fixture
def make_runner(catalog, tmp_path):
    def _make(rules, **kwargs):
        gw = make_mock_gateway(rules, models=("small", "stt"))
        return TaskAgentRunner(gw, catalog, extraction_model="small",
                               transcription_model="stt",
                               outbox_dir=tmp_path / "outbox",
                               session_start=SESSION_START, **kwargs)
    return _make


# -- transcription -----------------------------------------------------------------


def test_transcript_passthrough(make_runner):
    runner = make_runner([])
    seg = AudioSegment(start_ms=0, duration_ms=60_000,
                       transcript="schedule a sync with Priya tomorrow at 3")
    assert runner.transcribe(seg) == "schedule a sync with Priya tomorrow at 3"


def test_empty_transcript_skips_extraction(make_runner):
    runner = make_runner([])  # no rules: any model call would raise MockMiss
    seg = AudioSegment(start_ms=0, duration_ms=60_000, transcript="")
    assert runner.process_segment(seg) == []
    assert runner.action_log[-1]["status"] == "no_actions"


def test_audio_ref_transcribed_through_mock(make_runner):
    runner = make_runner([
        {"matcher": "audio-42", "response": "please email the minutes", "priority": 1},
    ])
    seg = AudioSegment(start_ms=0, duration_ms=60_000, audio_ref="audio-42")
    assert runner.transcribe(seg) == "please email the minutes"


# -- extraction --------------------------------------------------------------------


def test_extract_email_action(make_runner):
    runner = make_runner([
        {"matcher": "report summary", "response": EMAIL_ACTIONS, "priority": 5},
    ])
    items = runner.extract_actions("please email the report summary to the team",
                                   segment_start_ms=120_000)
    assert len(items) == 1
    item = items[0]
    assert item.kind == "email"
    assert item.payload["subject"] == "Report summary"
    assert item.confidence == "explicit"
    assert item.source_segment_start_ms == 120_000


def test_no_action_transcript_yields_empty(make_runner):
    runner = make_runner([
        {"matcher": "scan one-minute workplace audio", "response": "[]", "priority": 1},
    ])
    assert runner.extract_actions("nice weather today") == []


def test_malformed_json_twice_is_unparseable(make_runner):
    runner = make_runner([
        {"matcher": "scan one-minute workplace audio", "response": "not json",
         "priority": 1},
    ])
    with pytest.raises(UnparseableActions):
        runner.extract_actions("do something")


def test_unparseable_segment_marked_for_manual_review(make_runner):
    runner = make_runner([
        {"matcher": "scan one-minute workplace audio", "response": "not json",
         "priority": 1},
    ])
    seg = AudioSegment(start_ms=60_000, duration_ms=60_000, transcript="do the thing")
    assert runner.process_segment(seg) == []
    assert runner.action_log[-1]["status"] == "manual_review"


def test_unknown_kind_coerced_to_other(make_runner):
    runner = make_runner([
        {"matcher": "scan one-minute workplace audio",
         "response": json.dumps([{"kind": "fax", "description": "send a fax"}]),
         "priority": 1},
    ])
    items = runner.extract_actions("send a fax")
    assert items[0].kind == "other"


# -- relative time resolution ---------------------------------------------------------


def test_resolve_tomorrow_3pm():
    now = datetime(2024, 6, 3, 11, 15)
    assert resolve_relative_time("tomorrow at 3pm", now) == datetime(2024, 6, 4, 15, 0)


def test_resolve_today_24h_clock():
    now = datetime(2024, 6, 3, 11, 15)
    assert resolve_relative_time("today at 15:30", now) == datetime(2024, 6, 3, 15, 30)


def test_resolve_next_occurrence_rolls_forward():
    now = datetime(2024, 6, 3, 16, 0)
    assert resolve_relative_time("at 3pm", now) == datetime(2024, 6, 4, 15, 0)
    assert resolve_relative_time("at 5pm", now) == datetime(2024, 6, 3, 17, 0)


def test_bare_hour_is_ambiguous():
    now = datetime(2024, 6, 3, 11, 15)
    assert resolve_relative_time("tomorrow at 3", now) is None
    assert resolve_relative_time("no time here", now) is None


# -- dispatch -----------------------------------------------------------------------


def test_email_dispatch_writes_draft(make_runner, tmp_path):
    runner = make_runner([
        {"matcher": "report summary", "response": EMAIL_ACTIONS, "priority": 5},
    ])
    items = runner.extract_actions("email the report summary", segment_start_ms=0)
    result = runner.dispatch(items[0])
    draft = tmp_path / "outbox" / f"{items[0].id}.eml"
    assert str(draft) == result.artifact
    text = draft.read_text()
    assert "Subject: Report summary" in text
    assert "To: the team" in text


def test_calendar_dispatch_resolves_start_time(make_runner, tmp_path):
    # oracle: resolving "tomorrow at 3pm" against the segment's virtual clock
    seg_start = 45 * 60_000.0
    expected = resolve_relative_time(
        "tomorrow at 3pm", SESSION_START + timedelta(milliseconds=seg_start))
    runner = make_runner([
        {"matcher": "sync with Priya", "response": CALENDAR_ACTIONS, "priority": 5},
    ])
    items = runner.extract_actions("schedule a sync with Priya tomorrow at 3pm",
                                   segment_start_ms=seg_start)
    runner.dispatch(items[0])
    ics = (tmp_path / "outbox" / f"{items[0].id}.ics").read_text()
    assert f"DTSTART:{expected.strftime('%Y%m%dT%H%M%S')}" in ics
    assert "DURATION:PT30M" in ics
    assert "SUMMARY:Sync with Priya" in ics


def test_unregistered_kind_no_handler(make_runner):
    runner = make_runner([])
    item = ActionItem(id="act-x", kind="other", payload={},
                      source_segment_start_ms=0.0)
    with pytest.raises(NoHandler):
        runner.dispatch(item)
    assert runner.action_log[-1]["status"] == "no_handler"


def test_dispatch_exactly_once(make_runner):
    calls = []

    def handler(item, outbox, now):
        calls.append(item.id)
        return "artifact-path"

    runner = make_runner([])
    runner.registry.register("other", HandlerDescriptor("counter", "1", handler))
    item = ActionItem(id="act-y", kind="other", payload={},
                      source_segment_start_ms=0.0)
    first = runner.dispatch(item)
    second = runner.dispatch(item)
    assert calls == ["act-y"]
    assert first == second


def test_failed_handler_leaves_item_queued(make_runner):
    attempts = []

    def flaky(item, outbox, now):
        attempts.append(item.id)
        raise RuntimeError("disk full")

    runner = make_runner([])
    runner.registry.register("other", HandlerDescriptor("flaky", "1", flaky))
    item = ActionItem(id="act-z", kind="other", payload={},
                      source_segment_start_ms=0.0)
    with pytest.raises(HandlerFailed):
        runner.dispatch(item)
    assert runner.action_log[-1]["status"] == "queued"
    with pytest.raises(HandlerFailed):
        runner.dispatch(item)  # still queued: a retry reaches the handler again
    assert attempts == ["act-z", "act-z"]


def test_unresolved_calendar_start_fails_handler(make_runner):
    runner = make_runner([])
    item = ActionItem(id="act-u", kind="calendar_event",
                      payload={"title": "x", "start": "at 3"},
                      source_segment_start_ms=0.0, start_unresolved=True)
    with pytest.raises(HandlerFailed):
        runner.dispatch(item)


def test_registered_external_handler_writes_generic_draft(make_runner, tmp_path):
    runner = make_runner([])
    runner.register_external("other", "my-agent", "2.0")
    item = ActionItem(id="act-g", kind="other", payload={"description": "water plants"},
                      source_segment_start_ms=0.0)
    result = runner.dispatch(item)
    assert result.handler == "my-agent"
    data = json.loads((tmp_path / "outbox" / "act-g.json").read_text())
    assert data["payload"]["description"] == "water plants"


def test_builtin_drafts_stay_inside_outbox(make_runner, tmp_path):
    runner = make_runner([
        {"matcher": "report summary", "response": EMAIL_ACTIONS, "priority": 5},
    ])
    items = runner.extract_actions("email the report summary", segment_start_ms=0)
    result = runner.dispatch(items[0])
    assert str(tmp_path / "outbox") in result.artifact
    statuses = {e["status"] for e in runner.action_log}
    assert statuses == {"dispatched"}  # draft-only: no send states exist


def test_registry_single_handler_per_kind():
    registry = ToolRegistry()
    registry.register("email", HandlerDescriptor("a", "1", None))
    registry.register("email", HandlerDescriptor("b", "2", None))
    assert registry.describe() == {"email": {"name": "b", "version": "2"}}
