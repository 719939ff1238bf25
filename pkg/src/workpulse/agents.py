"""Task agents: scan one-minute transcripts for actionable items and run tools.

Built-in tools only produce drafts in an outbox directory (.eml for emails,
.ics for calendar events); nothing is ever sent on the user's behalf.
Relative times like "tomorrow at 3pm" resolve against the session's virtual
wall clock; ambiguous times are flagged, never guessed.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

from . import gateway as gw
from .errors import HandlerFailed, NoHandler, UnparseableActions
from .ingest import AudioSegment

EMAIL = "email"
CALENDAR_EVENT = "calendar_event"
OTHER = "other"

EXPLICIT = "explicit"
INFERRED = "inferred"

DEFAULT_EVENT_MINUTES = 30


@dataclass(frozen=True)
class ActionItem:
    id: str
    kind: str
    payload: dict
    source_segment_start_ms: float
    confidence: str = EXPLICIT
    start_resolved: datetime | None = None  # calendar events only
    start_unresolved: bool = False

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "payload": self.payload,
            "source_segment_start_ms": self.source_segment_start_ms,
            "confidence": self.confidence,
            "start_resolved": self.start_resolved.isoformat() if self.start_resolved else None,
            "start_unresolved": self.start_unresolved,
        }


@dataclass(frozen=True)
class ToolResult:
    item_id: str
    handler: str
    artifact: str


@dataclass(frozen=True)
class HandlerDescriptor:
    name: str
    version: str
    func: object | None = None  # None for API-registered descriptors


class ToolRegistry:
    """At most one handler per action kind; re-registration replaces."""

    def __init__(self):
        self._handlers: dict[str, HandlerDescriptor] = {}
        self._lock = threading.Lock()

    def register(self, kind: str, descriptor: HandlerDescriptor) -> None:
        with self._lock:
            self._handlers[kind] = descriptor

    def lookup(self, kind: str) -> HandlerDescriptor | None:
        with self._lock:
            return self._handlers.get(kind)

    def describe(self) -> dict[str, dict]:
        with self._lock:
            return {k: {"name": d.name, "version": d.version}
                    for k, d in self._handlers.items()}


# -- relative time resolution -------------------------------------------------

_TIME_RE = re.compile(
    r"(?:(today|tomorrow)\s+)?(?:at\s+)?(\d{1,2})(?::(\d{2}))?\s*(am|pm)?",
    re.IGNORECASE,
)


def resolve_relative_time(text: str, now: datetime) -> datetime | None:
    """Resolve "tomorrow at 3pm"-style expressions against the session clock.

    Returns None when the expression is ambiguous (e.g. a bare hour with no
    meridiem that could be morning or afternoon) or unparseable.
    """
    match = _TIME_RE.search(text)
    if not match:
        return None
    day_word, hour_s, minute_s, meridiem = match.groups()
    hour = int(hour_s)
    minute = int(minute_s) if minute_s else 0
    if minute > 59:
        return None

    if meridiem:
        if not 1 <= hour <= 12:
            return None
        hour = hour % 12 + (12 if meridiem.lower() == "pm" else 0)
    elif minute_s and 0 <= hour <= 23:
        pass  # explicit HH:MM reads as 24-hour time
    else:
        return None  # bare hour without am/pm is ambiguous

    base = now.replace(hour=hour, minute=minute, second=0, microsecond=0)
    if day_word and day_word.lower() == "tomorrow":
        return base + timedelta(days=1)
    if day_word and day_word.lower() == "today":
        return base
    # no day word: next occurrence
    return base if base > now else base + timedelta(days=1)


# -- built-in draft writers ---------------------------------------------------

def _ics_escape(text: str) -> str:
    return (text.replace("\\", "\\\\").replace(";", "\\;")
            .replace(",", "\\,").replace("\n", "\\n"))


def write_email_draft(item: ActionItem, outbox: Path, now: datetime) -> str:
    payload = item.payload
    lines = [
        f"To: {payload.get('recipient_hint', 'unknown recipient')}",
        f"Subject: {payload.get('subject', '(no subject)')}",
        f"Date: {now.strftime('%a, %d %b %Y %H:%M:%S')} +0000",
        "MIME-Version: 1.0",
        'Content-Type: text/plain; charset="utf-8"',
        "",
        payload.get("body_draft", ""),
        "",
    ]
    path = outbox / f"{item.id}.eml"
    path.write_text("\r\n".join(lines), encoding="utf-8")
    return str(path)


def write_calendar_draft(item: ActionItem, outbox: Path, now: datetime) -> str:
    if item.start_resolved is None:
        raise HandlerFailed(f"{item.id}: event start time is unresolved")
    payload = item.payload
    start = item.start_resolved
    duration = int(payload.get("duration_minutes") or DEFAULT_EVENT_MINUTES)
    description = f"Attendees: {payload.get('attendees_hint', '')}".strip()
    lines = [
        "BEGIN:VCALENDAR",
        "VERSION:2.0",
        "PRODID:-//workpulse//task-agents//EN",
        "BEGIN:VEVENT",
        f"UID:{item.id}",
        f"DTSTAMP:{now.strftime('%Y%m%dT%H%M%S')}",
        f"DTSTART:{start.strftime('%Y%m%dT%H%M%S')}",
        f"DURATION:PT{duration}M",
        f"SUMMARY:{_ics_escape(payload.get('title', 'Untitled event'))}",
        f"DESCRIPTION:{_ics_escape(description)}",
        "END:VEVENT",
        "END:VCALENDAR",
        "",
    ]
    path = outbox / f"{item.id}.ics"
    path.write_text("\r\n".join(lines), encoding="utf-8")
    return str(path)


def write_generic_draft(item: ActionItem, outbox: Path, now: datetime) -> str:
    # user-registered descriptors without code get a JSON task file
    path = outbox / f"{item.id}.json"
    path.write_text(json.dumps(item.to_json_obj(), sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return str(path)


# -- extraction + dispatch ----------------------------------------------------

def _first_json_array(text: str):
    start = text.find("[")
    while start != -1:
        depth = 0
        in_str = False
        escape = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
                if depth == 0:
                    try:
                        arr = json.loads(text[start:i + 1])
                    except json.JSONDecodeError:
                        break
                    if isinstance(arr, list):
                        return arr
                    break
        start = text.find("[", start + 1)
    raise ValueError("no JSON array in model output")


_RETRY_REMINDER = (
    "\n\nYour previous output could not be parsed:\n{raw}\n"
    "Respond with a JSON array only; return [] when there are no actionable items."
)


class TaskAgentRunner:
    """Transcribe segments, extract action items, dispatch tools exactly once."""

    def __init__(self, gateway: gw.Gateway, prompts, extraction_model: str,
                 transcription_model: str, outbox_dir, session_start: datetime,
                 registry: ToolRegistry | None = None, timeout_s: float = 30.0,
                 bus=None):
        self._gateway = gateway
        self._prompts = prompts
        self._extraction_model = extraction_model
        self._transcription_model = transcription_model
        self._outbox = Path(outbox_dir)
        self._outbox.mkdir(parents=True, exist_ok=True)
        self._session_start = session_start
        self._timeout_s = timeout_s
        self._bus = bus
        self._lock = threading.Lock()
        self._results: dict[str, ToolResult] = {}
        self.action_log: list[dict] = []

        self.registry = registry or ToolRegistry()
        if self.registry.lookup(EMAIL) is None:
            self.registry.register(EMAIL, HandlerDescriptor(
                "builtin-email-draft", "1", write_email_draft))
        if self.registry.lookup(CALENDAR_EVENT) is None:
            self.registry.register(CALENDAR_EVENT, HandlerDescriptor(
                "builtin-calendar-draft", "1", write_calendar_draft))

    def register_external(self, kind: str, name: str, version: str) -> None:
        self.registry.register(kind, HandlerDescriptor(name, version, write_generic_draft))

    def set_session_start(self, session_start: datetime) -> None:
        self._session_start = session_start

    # -- transcription -----------------------------------------------------

    def transcribe(self, segment: AudioSegment) -> str:
        """Transcript passthrough when present; otherwise a gateway round trip."""
        if segment.transcript is not None:
            return segment.transcript
        req = gw.ModelRequest(
            kind=gw.COMPLETION, model_id=self._transcription_model,
            system_prompt=self._prompts["transcription"],
            user_content=f"Transcribe audio segment: {segment.audio_ref}",
            max_latency_s=self._timeout_s)
        return self._gateway.invoke(req).text

    # -- extraction --------------------------------------------------------

    def extract_actions(self, transcript: str, segment_start_ms: float = 0.0) -> list[ActionItem]:
        """Ask the model for a JSON array of actionable items and parse it."""
        system = self._prompts["action_extraction"]
        user = f'Transcript:\n"{transcript}"\nOutput:'
        first = self._invoke(system, user)
        try:
            raw_items = _first_json_array(first)
        except ValueError:
            second = self._invoke(system, user + _RETRY_REMINDER.format(raw=first))
            try:
                raw_items = _first_json_array(second)
            except ValueError:
                raise UnparseableActions(first, second) from None

        now = self._session_start + timedelta(milliseconds=segment_start_ms)
        items = []
        for idx, raw in enumerate(raw_items, start=1):
            if not isinstance(raw, dict):
                continue
            kind = raw.get("kind")
            if kind not in (EMAIL, CALENDAR_EVENT):
                kind = OTHER
            payload = {k: v for k, v in raw.items() if k not in ("kind", "confidence")}
            confidence = raw.get("confidence", INFERRED)
            if confidence not in (EXPLICIT, INFERRED):
                confidence = INFERRED
            resolved, unresolved = None, False
            if kind == CALENDAR_EVENT:
                resolved = resolve_relative_time(str(raw.get("start", "")), now)
                unresolved = resolved is None
            items.append(ActionItem(
                id=f"act-{int(segment_start_ms):09d}-{idx}",
                kind=kind, payload=payload,
                source_segment_start_ms=segment_start_ms,
                confidence=confidence,
                start_resolved=resolved, start_unresolved=unresolved))
        return items

    def _invoke(self, system: str, user: str) -> str:
        req = gw.ModelRequest(kind=gw.COMPLETION, model_id=self._extraction_model,
                              system_prompt=system, user_content=user,
                              max_latency_s=self._timeout_s)
        return self._gateway.invoke(req).text

    # -- dispatch ------------------------------------------------------------

    def dispatch(self, item: ActionItem) -> ToolResult:
        """Invoke the registered handler exactly once per item id.

        Re-dispatching a completed item returns the recorded result without
        touching the handler again; a failed handler leaves the item queued.
        """
        with self._lock:
            done = self._results.get(item.id)
        if done is not None:
            return done

        descriptor = self.registry.lookup(item.kind)
        if descriptor is None:
            self._log(item, "no_handler", None)
            raise NoHandler(f"no handler registered for kind {item.kind!r}")

        now = self._session_start + timedelta(milliseconds=item.source_segment_start_ms)
        func = descriptor.func or write_generic_draft
        try:
            artifact = func(item, self._outbox, now)
        except HandlerFailed:
            self._log(item, "queued", None)
            raise
        except Exception as exc:
            self._log(item, "queued", None)
            raise HandlerFailed(f"{descriptor.name}: {exc}") from exc

        result = ToolResult(item_id=item.id, handler=descriptor.name, artifact=artifact)
        with self._lock:
            self._results[item.id] = result
        self._log(item, "dispatched", artifact)
        if self._bus is not None:
            self._bus.publish("action", {"id": item.id, "kind": item.kind,
                                         "artifact": artifact})
        return result

    # -- segment pipeline ----------------------------------------------------

    def process_segment(self, segment: AudioSegment) -> list[ActionItem]:
        """Full path for one segment: transcribe, extract, dispatch.

        Every segment ends in exactly one of: no actions, dispatched/queued
        items, or a manual-review mark when extraction was unparseable.
        """
        transcript = self.transcribe(segment)
        if not transcript.strip():
            self._log_segment(segment, "no_actions")
            return []
        try:
            items = self.extract_actions(transcript, segment.start_ms)
        except UnparseableActions:
            self._log_segment(segment, "manual_review")
            return []
        if not items:
            self._log_segment(segment, "no_actions")
            return []
        for item in items:
            try:
                self.dispatch(item)
            except (NoHandler, HandlerFailed):
                pass  # already logged; the item stays visible in the log
        return items

    def _log(self, item: ActionItem, status: str, artifact: str | None) -> None:
        with self._lock:
            self.action_log.append({"type": "action", "status": status,
                                    "artifact": artifact, **item.to_json_obj()})

    def _log_segment(self, segment: AudioSegment, status: str) -> None:
        with self._lock:
            self.action_log.append({"type": "segment", "status": status,
                                    "segment_start_ms": segment.start_ms})

    def log_snapshot(self) -> list[dict]:
        with self._lock:
            return [dict(entry) for entry in self.action_log]

    def outcome_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        with self._lock:
            for entry in self.action_log:
                counts[entry["status"]] = counts.get(entry["status"], 0) + 1
        return counts
