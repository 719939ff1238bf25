"""Composition root: configuration, the virtual clock, and the replay loop.

One process runs four periodic pipelines on a shared virtual clock: frame
and screen perception at the trace's capture cadence, audio segments as they
complete, and routine sealing plus intervention generation at the routine
interval. A model failure in one pipeline never stalls the others beyond the
current tick.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import gateway as gw
from .agents import TaskAgentRunner
from .bus import EventBus
from .conversation import ConversationCenter
from .errors import ConfigError, EngineError
from .ingest import DEFAULT_SESSION_START, TraceSession, open_trace
from .interventions import (InterventionCenter, InterventionRequestContext,
                            map_stress_token)
from .perception import Criticality, PerceptionPipeline
from .physio import StressLevel, build_window, classify_stress
from .prompts import load_catalog
from .routine import RoutineBook

logger = logging.getLogger(__name__)

DEFAULT_ROUTES = {
    "caption": "llama-3.2-11b-vision",
    "insight": "llama-3.1-8b",
    "intervention": "llama-3.1-70b",
    "chat": "llama-3.1-70b",
    "extraction": "llama-3.1-8b",
    "transcription": "whisper-large-v3-turbo",
}

# generous multiples of the observed per-call averages (2.70 s captioning,
# 1.69 s insight, 8.2 s intervention, 5.23 s transcription)
DEFAULT_TIMEOUTS_S = {
    "caption": 30.0,
    "insight": 30.0,
    "intervention": 60.0,
    "chat": 60.0,
    "extraction": 30.0,
    "transcription": 60.0,
}


@dataclass
class EngineConfig:
    frame_cadence_s: float = 60.0
    routine_interval_s: float = 900.0
    audio_segment_s: float = 60.0
    speed_factor: float = 1.0
    model_routes: dict = field(default_factory=lambda: dict(DEFAULT_ROUTES))
    timeouts_s: dict = field(default_factory=lambda: dict(DEFAULT_TIMEOUTS_S))
    mock_rules: str | None = None
    live_url: str | None = None
    temperature: float = 0.0  # greedy decoding keeps live runs reproducible
    prompt_dir: str | None = None
    store_dir: str = "out/store"
    outbox_dir: str = "out/outbox"
    summary_path: str = "out/summary.json"
    listen: str = "127.0.0.1:8787"
    timetable_rows: int = 4

    def __post_init__(self):
        if self.speed_factor <= 0:
            raise ConfigError("speed_factor must be positive")
        ratio = self.routine_interval_s / self.frame_cadence_s
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("routine_interval_s must be an integer multiple "
                              "of frame_cadence_s")
        for key in DEFAULT_ROUTES:
            self.model_routes.setdefault(key, DEFAULT_ROUTES[key])
            self.timeouts_s.setdefault(key, DEFAULT_TIMEOUTS_S[key])

    @classmethod
    def from_file(cls, path) -> "EngineConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


@dataclass(frozen=True)
class PipelineTick:
    pipeline: str
    virtual_time_ms: float
    outcome: str  # "ok" | "skipped" | "error: ..."


def build_gateway(config: EngineConfig) -> gw.Gateway:
    known = set(config.model_routes.values())
    if config.mock_rules:
        return gw.mock_gateway(gw.load_mock_rules(config.mock_rules), known)
    if config.live_url:
        return gw.live_gateway(config.live_url, known, temperature=config.temperature)
    raise ConfigError("config needs either mock_rules or live_url")


class Engine:
    """Owns the virtual clock and wires every pipeline together."""

    def __init__(self, config: EngineConfig, gateway: gw.Gateway | None = None,
                 session: TraceSession | None = None):
        self.config = config
        self.gateway = gateway or build_gateway(config)
        self.prompts = load_catalog(config.prompt_dir)
        self.bus = EventBus()
        self.now_ms = 0.0
        self.ticks: list[PipelineTick] = []

        session_start = session.session_start if session else None
        self.session = session
        routes, timeouts = config.model_routes, config.timeouts_s

        self.perception = PerceptionPipeline(
            self.gateway, self.prompts,
            caption_model=routes["caption"], insight_model=routes["insight"],
            caption_timeout_s=timeouts["caption"], insight_timeout_s=timeouts["insight"])
        self.routine = RoutineBook(
            session_start=session_start or DEFAULT_SESSION_START,
            row_minutes=config.routine_interval_s / 60.0)
        self.interventions = InterventionCenter(
            self.gateway, self.prompts, model_id=routes["intervention"],
            interval_ms=config.routine_interval_s * 1000.0,
            timeout_s=timeouts["intervention"], bus=self.bus)
        self.conversations = ConversationCenter(
            self.gateway, self.prompts, model_id=routes["chat"],
            timeout_s=timeouts["chat"], context_rows=config.timetable_rows)
        self.agents = TaskAgentRunner(
            self.gateway, self.prompts,
            extraction_model=routes["extraction"],
            transcription_model=routes["transcription"],
            outbox_dir=config.outbox_dir,
            session_start=self.routine.session_start,
            timeout_s=timeouts["extraction"], bus=self.bus)

        self._last_criticality: Criticality | None = None

    # -- state consumed by the service -------------------------------------

    def current_stress(self) -> StressLevel:
        """Stress from the latest sealed row; no data claims no stress."""
        for row in reversed(self.routine.rows):
            if row.pnn50 is not None:
                return classify_stress(row.pnn50)
        return StressLevel.LOW

    def _tick(self, pipeline: str, outcome: str) -> None:
        self.ticks.append(PipelineTick(pipeline, self.now_ms, outcome))

    # -- replay -----------------------------------------------------------------

    def replay(self, trace_dir=None, pace: bool = False) -> dict:
        """Replay a trace to its end and flush stores; returns the summary.

        ``pace`` throttles wall time to speed_factor (virtual seconds per wall
        second) for live-like demos; plain replays run as fast as possible and
        produce identical output either way.
        """
        session = self.session if trace_dir is None else open_trace(trace_dir)
        self.session = session
        self.routine.session_start = session.session_start
        self.agents.set_session_start(session.session_start)
        self.routine.attach_store(self.config.store_dir)

        interval_ms = self.config.routine_interval_s * 1000.0
        trace_end = session.span_ms
        next_seal = interval_ms
        wall_start = time.monotonic()

        while True:
            # the seal boundary is exclusive: ts <= nextafter(b, -inf) iff ts < b
            target = min(math.nextafter(next_seal, -math.inf), trace_end)
            if pace:
                self._pace_until(target, wall_start)
            for ts, kind, payload in session.next_events(
                    target, streams=("frame", "screen", "audio")):
                self.now_ms = ts
                if kind == "frame":
                    self._handle_frame(payload)
                elif kind == "screen":
                    self._handle_screen(payload)
                elif kind == "audio":
                    self._handle_audio(payload)
            if next_seal <= trace_end:
                self.now_ms = next_seal
                self._handle_seal(session, next_seal - interval_ms, next_seal)
                next_seal += interval_ms
            else:
                self.now_ms = trace_end
                break

        self.routine.flush()
        summary = self.summary()
        self._write_summary(summary)
        return summary

    def _pace_until(self, virtual_target_ms: float, wall_start: float) -> None:
        target_wall = virtual_target_ms / 1000.0 / self.config.speed_factor
        delay = target_wall - (time.monotonic() - wall_start)
        if delay > 0:
            time.sleep(delay)

    # -- pipeline handlers -------------------------------------------------

    def _handle_frame(self, frame) -> None:
        try:
            insight = self.perception.process_frame(frame)
        except EngineError as exc:
            logger.error("frame pipeline error at %.0f: %s", self.now_ms, exc)
            self._tick("frame", f"error: {exc}")
            return
        if insight is None:
            self._tick("frame", "skipped")
            return
        try:
            self.routine.accumulate(insight, self.config.frame_cadence_s)
        except EngineError as exc:
            logger.error("routine accumulate error at %.0f: %s", self.now_ms, exc)
            self._tick("frame", f"error: {exc}")
            return
        if insight.criticality != self._last_criticality:
            self._last_criticality = insight.criticality
            self.interventions.note_criticality(insight.criticality, self.now_ms)
        self._tick("frame", "ok")

    def _handle_screen(self, frame) -> None:
        try:
            self.perception.caption_screen(frame)
            self._tick("screen", "ok")
        except EngineError as exc:
            logger.error("screen pipeline error at %.0f: %s", self.now_ms, exc)
            self._tick("screen", f"error: {exc}")

    def _handle_audio(self, segment) -> None:
        try:
            self.agents.process_segment(segment)
            self._tick("audio", "ok")
        except EngineError as exc:
            logger.error("audio pipeline error at %.0f: %s", self.now_ms, exc)
            self._tick("audio", f"error: {exc}")

    def _handle_seal(self, session: TraceSession, start_ms: float, end_ms: float) -> None:
        try:
            physio = build_window(session.ecg_between(start_ms, end_ms),
                                  session.imu_between(start_ms, end_ms),
                                  (start_ms, end_ms))
            row = self.routine.close_row(physio)
            self.bus.publish("routine_row", row.to_json_obj())
        except EngineError as exc:
            logger.error("routine seal error at %.0f: %s", self.now_ms, exc)
            self._tick("routine", f"error: {exc}")
            return
        self._tick("routine", "ok")
        self._generate_intervention()

    def _generate_intervention(self) -> None:
        last = self.perception.last_insight
        if last is None:
            self._tick("intervention", "skipped")
            return
        stress = map_stress_token(self.current_stress())
        timetable = self.routine.render_for_prompt(self.config.timetable_rows, hrv="none")
        surrounding = " ".join(last.surrounding.split()[:6])
        screen_lines = [f"Frame {i}: {desc}" for i, (_, desc)
                        in enumerate(self.perception.latest_screen_context(), start=1)]
        ctx = InterventionRequestContext(
            stress_level=stress, activity_timetable=timetable,
            surrounding_type=surrounding,
            screen_capture_data="\n".join(screen_lines) or "(no screen data)")
        try:
            self.interventions.on_interval(ctx, last.criticality, self.now_ms)
            self._tick("intervention", "ok")
        except EngineError as exc:
            logger.error("intervention pipeline error at %.0f: %s", self.now_ms, exc)
            self._tick("intervention", f"error: {exc}")

    # -- reporting --------------------------------------------------------------

    def summary(self) -> dict:
        tick_counts: dict[str, int] = {}
        for tick in self.ticks:
            tick_counts[tick.pipeline] = tick_counts.get(tick.pipeline, 0) + 1
        return {
            "virtual_span_ms": self.session.span_ms if self.session else 0.0,
            "rows_sealed": len(self.routine.rows),
            "interventions": self.interventions.status_counts(),
            "actions": self.agents.outcome_counts(),
            "latency": self.gateway.latency.snapshot(),
            "ticks": tick_counts,
        }

    def _write_summary(self, summary: dict) -> None:
        path = Path(self.config.summary_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n",
                        encoding="utf-8")
