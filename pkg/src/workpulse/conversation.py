"""Tone-adaptive chat agent.

The reply tone starts from the user's current stress level and steps down one
level every three user turns, never below neutral: long conversations drift
toward a plain, direct style while short ones keep their motivational push.
The routine table (with per-row stress tokens) rides along as context.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import IntEnum

from . import gateway as gw
from .errors import EmptyTable
from .physio import StressLevel
from .routine import RoutineTable, render_rows

HISTORY_LIMIT = 12      # messages sent to the model
DECAY_EVERY_TURNS = 3   # one tone step down per this many user turns


class ToneLevel(IntEnum):
    NEUTRAL_SUBTLE = 0
    MODERATELY_MOTIVATIONAL = 1
    HIGHLY_MOTIVATIONAL = 2

    @property
    def token(self) -> str:
        return {
            0: "neutral_subtle",
            1: "moderately_motivational",
            2: "highly_motivational",
        }[int(self)]


_TONE_DIRECTIVES = {
    ToneLevel.HIGHLY_MOTIVATIONAL:
        "Use a highly motivational and encouraging tone (highly_motivational).",
    ToneLevel.MODERATELY_MOTIVATIONAL:
        "Use a moderately motivational tone (moderately_motivational).",
    ToneLevel.NEUTRAL_SUBTLE:
        "Use a subtle, straightforward tone (neutral_subtle).",
}


def select_base_tone(stress: StressLevel) -> ToneLevel:
    if stress is StressLevel.HIGH:
        return ToneLevel.HIGHLY_MOTIVATIONAL
    if stress is StressLevel.MODERATE:
        return ToneLevel.MODERATELY_MOTIVATIONAL
    return ToneLevel.NEUTRAL_SUBTLE


def effective_tone(base: ToneLevel, turn: int) -> ToneLevel:
    """Tone after progressive simplification, floored at neutral."""
    if turn < 1:
        raise ValueError("turn counts from 1")
    decayed = int(base) - (turn - 1) // DECAY_EVERY_TURNS
    return ToneLevel(max(decayed, int(ToneLevel.NEUTRAL_SUBTLE)))


@dataclass
class ConversationState:
    id: str
    messages: list[tuple[str, str, float]] = field(default_factory=list)  # role, text, ts
    turn_count: int = 0
    base_tone: ToneLevel = ToneLevel.NEUTRAL_SUBTLE
    effective_tone: ToneLevel = ToneLevel.NEUTRAL_SUBTLE

    def to_json_obj(self) -> dict:
        return {
            "conversation_id": self.id,
            "messages": [{"role": r, "text": t, "ts_ms": ts} for r, t, ts in self.messages],
            "turn": self.turn_count,
            "tone": self.effective_tone.token,
        }


class ConversationCenter:
    """Holds chat states; one conversation is strictly sequential."""

    def __init__(self, gateway: gw.Gateway, prompts, model_id: str,
                 timeout_s: float = 60.0, context_rows: int = 4):
        self._gateway = gateway
        self._prompts = prompts
        self._model_id = model_id
        self._timeout_s = timeout_s
        self._context_rows = context_rows
        self._lock = threading.Lock()
        self._states: dict[str, ConversationState] = {}
        self._counter = 0

    def get_or_create(self, conversation_id: str | None) -> ConversationState:
        with self._lock:
            if conversation_id is None:
                self._counter += 1
                conversation_id = f"c-{self._counter:04d}"
            state = self._states.get(conversation_id)
            if state is None:
                state = ConversationState(id=conversation_id)
                self._states[conversation_id] = state
            return state

    def get(self, conversation_id: str) -> ConversationState | None:
        with self._lock:
            return self._states.get(conversation_id)

    def build_prompt(self, state: ConversationState, query: str,
                     table: RoutineTable, tone: ToneLevel) -> tuple[str, str]:
        system = (self._prompts["chat_tone"]
                  + "\n\nTone directive: " + _TONE_DIRECTIVES[tone])
        try:
            context = render_rows(table, self._context_rows, hrv="stress")
        except EmptyTable:
            context = "(no routine intervals recorded yet)"
        history = state.messages[-HISTORY_LIMIT:]
        lines = [f"{role}: {text}" for role, text, _ in history]
        convo = "\n".join(lines) if lines else "(none)"
        user = (f"Recent routine:\n{context}\n\n"
                f"Conversation so far:\n{convo}\n\n"
                f"User query: {query}")
        return system, user

    def respond(self, state: ConversationState, query: str, table: RoutineTable,
                stress: StressLevel, now_ms: float) -> tuple[str, ConversationState]:
        """Answer one user query, updating tone and history.

        Gateway failures propagate before any state mutation, so a failed
        turn leaves no phantom messages behind.
        """
        if not query:
            raise ValueError("query must be non-empty")
        turn = state.turn_count + 1
        base = select_base_tone(stress)
        tone = effective_tone(base, turn)
        system, user = self.build_prompt(state, query, table, tone)
        req = gw.ModelRequest(kind=gw.COMPLETION, model_id=self._model_id,
                              system_prompt=system, user_content=user,
                              max_latency_s=self._timeout_s)
        reply = self._gateway.invoke(req).text
        state.messages.append(("user", query, now_ms))
        state.messages.append(("assistant", reply, now_ms))
        state.turn_count = turn
        state.base_tone = base
        state.effective_tone = tone
        return reply, state
