"""Criticality-gated well-being interventions.

Once per routine interval the engine assembles stress level, the
HRV-excluded timetable, the surrounding type and recent screen activity into
a wellness prompt, parses the returned analysis/intervention JSON, and runs
the delivery lifecycle: interventions deliver only while task criticality is
Low or Mid, block during High, and expire once stale.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

from . import gateway as gw
from .errors import InvalidTransition, UnknownId, UnparseableIntervention
from .perception import Criticality
from .physio import StressLevel

PENDING = "pending"
DELIVERED = "delivered"
ACCEPTED = "accepted"
REJECTED = "rejected"
EXPIRED = "expired"
BLOCKED = "blocked"

_TRANSITIONS = {
    PENDING: {DELIVERED, BLOCKED, EXPIRED},
    BLOCKED: {DELIVERED, EXPIRED},
    DELIVERED: {ACCEPTED, REJECTED, EXPIRED},
    ACCEPTED: set(),
    REJECTED: set(),
    EXPIRED: set(),
}

STRESSED = "stressed"
NOT_STRESSED = "not stressed"


def map_stress_token(level: StressLevel) -> str:
    """Collapse the three-level stress estimate to the binary prompt token.

    Moderate maps to "stressed": the conservative reading, since the wellness
    prompt treats anything but a relaxed state as worth acting on.
    """
    return NOT_STRESSED if level is StressLevel.LOW else STRESSED


@dataclass(frozen=True)
class InterventionRequestContext:
    stress_level: str
    activity_timetable: str
    surrounding_type: str
    screen_capture_data: str

    def __post_init__(self):
        if self.stress_level not in (STRESSED, NOT_STRESSED):
            raise ValueError(f"bad stress token {self.stress_level!r}")
        if "pNN50" in self.activity_timetable or "HRV" in self.activity_timetable:
            raise ValueError("intervention timetable must not carry HRV columns")


@dataclass
class Intervention:
    id: str
    created_at_ms: float
    analysis: str
    immediate_action: str
    follow_up: str
    task_improvement: str | None = None
    status: str = PENDING
    blocked_reason: str | None = None
    delivered_at_ms: float | None = None
    decided_at_ms: float | None = None

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "created_at_ms": self.created_at_ms,
            "analysis": self.analysis,
            "immediate_action": self.immediate_action,
            "follow_up": self.follow_up,
            "task_improvement": self.task_improvement,
            "status": self.status,
            "blocked_reason": self.blocked_reason,
            "delivered_at_ms": self.delivered_at_ms,
            "decided_at_ms": self.decided_at_ms,
        }


def _first_json_object(text: str) -> dict:
    """Extract the first balanced JSON object from a model reply."""
    start = text.find("{")
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
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    try:
                        obj = json.loads(text[start:i + 1])
                    except json.JSONDecodeError:
                        break
                    if isinstance(obj, dict):
                        return obj
                    break
        start = text.find("{", start + 1)
    raise ValueError("no JSON object in model output")


def parse_intervention_output(text: str) -> tuple[str, str, str, str | None]:
    """Pull (analysis, immediate action, follow-up, task improvement) out of
    the model's JSON; Task Improvement is optional in the reply schema."""
    obj = _first_json_object(text)
    try:
        analysis = obj["Analysis"]
        actions = obj["Interventions"]
        immediate = actions["Immediate Action"]
        follow_up = actions["Follow-Up"]
    except (KeyError, TypeError):
        raise ValueError("intervention JSON missing required keys") from None
    if not all(isinstance(v, str) and v for v in (analysis, immediate, follow_up)):
        raise ValueError("intervention JSON fields must be non-empty strings")
    improvement = obj.get("Task Improvement")
    return analysis, immediate, follow_up, improvement


_FORMAT_REMINDER = (
    "\n\nYour previous output could not be parsed:\n{raw}\n"
    'Respond with a single JSON object of the form '
    '{{"Analysis": "...", "Interventions": {{"Immediate Action": "...", '
    '"Follow-Up": "..."}}}}'
)


class InterventionCenter:
    """Generation plus the delivery state machine.

    Holds at most one undelivered intervention; generating a new one expires
    whatever is still held. A blocked intervention older than one routine
    interval expires on the next re-gate instead of firing stale advice.
    """

    def __init__(self, gateway: gw.Gateway, prompts, model_id: str,
                 interval_ms: float, timeout_s: float = 60.0, bus=None):
        self._gateway = gateway
        self._prompts = prompts
        self._model_id = model_id
        self._interval_ms = interval_ms
        self._timeout_s = timeout_s
        self._bus = bus
        self._lock = threading.RLock()
        self._by_id: dict[str, Intervention] = {}
        self._order: list[str] = []
        self._held_id: str | None = None
        self._counter = 0

    # -- generation -------------------------------------------------------

    def build_prompt(self, ctx: InterventionRequestContext) -> tuple[str, str]:
        system = self._prompts["intervention"] + "\n\n" + self._prompts["intervention_fewshots"]
        user = (
            'Input: {\n'
            f'    "stress_level": "{ctx.stress_level}",\n'
            f'    "activity_timetable": """\n{ctx.activity_timetable}\n""",\n'
            f'    "surrounding_type": "{ctx.surrounding_type}",\n'
            f'    "screen_capture_data": """\n{ctx.screen_capture_data}\n"""\n'
            '}\nOutput:'
        )
        return system, user

    def generate(self, ctx: InterventionRequestContext, now_ms: float) -> Intervention:
        """Issue the wellness completion and parse it; one re-prompt on failure."""
        system, user = self.build_prompt(ctx)
        first = self._invoke(system, user)
        try:
            analysis, immediate, follow_up, improvement = parse_intervention_output(first)
        except ValueError:
            second = self._invoke(system, user + _FORMAT_REMINDER.format(raw=first))
            try:
                analysis, immediate, follow_up, improvement = parse_intervention_output(second)
            except ValueError:
                raise UnparseableIntervention(first, second) from None
        with self._lock:
            self._counter += 1
            iv = Intervention(id=f"iv-{self._counter:04d}", created_at_ms=now_ms,
                              analysis=analysis, immediate_action=immediate,
                              follow_up=follow_up, task_improvement=improvement)
            self._by_id[iv.id] = iv
            self._order.append(iv.id)
            return iv

    def _invoke(self, system: str, user: str) -> str:
        req = gw.ModelRequest(kind=gw.COMPLETION, model_id=self._model_id,
                              system_prompt=system, user_content=user,
                              max_latency_s=self._timeout_s)
        return self._gateway.invoke(req).text

    # -- lifecycle ----------------------------------------------------------

    def _transition(self, iv: Intervention, new_status: str, now_ms: float) -> None:
        if new_status not in _TRANSITIONS[iv.status]:
            raise InvalidTransition(f"{iv.id}: {iv.status} -> {new_status}")
        iv.status = new_status
        if new_status == DELIVERED:
            iv.delivered_at_ms = now_ms
            iv.blocked_reason = None
            if self._bus is not None:
                self._bus.publish("intervention", iv.to_json_obj())
        elif new_status in (ACCEPTED, REJECTED):
            iv.decided_at_ms = now_ms

    def gate(self, iv: Intervention, current: Criticality, now_ms: float) -> Intervention:
        """Apply the delivery gate to a pending or blocked intervention."""
        with self._lock:
            if iv.status not in (PENDING, BLOCKED):
                raise InvalidTransition(f"cannot gate an intervention in {iv.status!r}")
            if iv.status == BLOCKED and now_ms - iv.created_at_ms > self._interval_ms:
                self._transition(iv, EXPIRED, now_ms)
            elif current in (Criticality.LOW, Criticality.MID):
                self._transition(iv, DELIVERED, now_ms)
            else:
                if iv.status == PENDING:
                    self._transition(iv, BLOCKED, now_ms)
                iv.blocked_reason = current.label
            if iv.status in (EXPIRED, DELIVERED) and self._held_id == iv.id:
                self._held_id = None
            return iv

    def on_interval(self, ctx: InterventionRequestContext, current: Criticality,
                    now_ms: float) -> Intervention:
        """Routine-tick entry point: expire the held item, generate, gate."""
        with self._lock:
            held = self._by_id.get(self._held_id) if self._held_id else None
            if held is not None and held.status in (PENDING, BLOCKED):
                self._transition(held, EXPIRED, now_ms)
            self._held_id = None
        iv = self.generate(ctx, now_ms)
        with self._lock:
            self._held_id = iv.id
        return self.gate(iv, current, now_ms)

    def note_criticality(self, current: Criticality, now_ms: float) -> None:
        """Re-gate the held intervention whenever criticality changes."""
        with self._lock:
            held = self._by_id.get(self._held_id) if self._held_id else None
        if held is not None and held.status in (PENDING, BLOCKED):
            self.gate(held, current, now_ms)

    def decide(self, iv_id: str, decision: str, now_ms: float) -> Intervention:
        """Record the user's accept/reject; the record is immutable afterwards."""
        if decision not in (ACCEPTED, REJECTED):
            raise ValueError(f"decision must be accepted or rejected, got {decision!r}")
        with self._lock:
            iv = self._by_id.get(iv_id)
            if iv is None:
                raise UnknownId(iv_id)
            self._transition(iv, decision, now_ms)
            return iv

    # -- views ------------------------------------------------------------

    def get(self, iv_id: str) -> Intervention:
        with self._lock:
            iv = self._by_id.get(iv_id)
            if iv is None:
                raise UnknownId(iv_id)
            return iv

    def list(self, status: str | None = None) -> list[dict]:
        with self._lock:
            items = [self._by_id[i].to_json_obj() for i in self._order]
        if status is not None:
            items = [it for it in items if it["status"] == status]
        return items

    def status_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in _TRANSITIONS}
        with self._lock:
            for iv_id in self._order:
                counts[self._by_id[iv_id].status] += 1
        return counts
