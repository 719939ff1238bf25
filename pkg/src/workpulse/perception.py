"""Vision pipeline: frame captions, insight extraction, screen-activity buffer.

Egocentric frames are captioned with the previous frame's detected activity
injected into the prompt (misread objects correct themselves when the model
knows what just happened). Captions then pass through a completion call that
emits one bracket-pipe line: [description | class | criticality | surrounding].
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, replace
from enum import Enum, IntEnum

from . import gateway as gw
from .errors import UnparseableInsight
from .ingest import EGOCENTRIC, SCREEN, FrameEvent
from .prompts import PromptCatalog, fill_previous_activity

logger = logging.getLogger(__name__)

SCREEN_BUFFER_CAPACITY = 10


class ActivityClass(Enum):
    DESK_WORK = "Desk_Work"
    COMMUTING = "Commuting"
    EATING = "Eating"
    IN_MEETING = "In_Meeting"
    OTHER = "Other"


class Criticality(IntEnum):
    LOW = 0
    MID = 1
    HIGH = 2

    @property
    def label(self) -> str:
        return {0: "Low", 1: "Mid", 2: "High"}[int(self)]


_CLASS_TOKENS = {c.value.lower(): c for c in ActivityClass}
_CRIT_TOKENS = {"low": Criticality.LOW, "mid": Criticality.MID, "high": Criticality.HIGH}


def parse_activity_class(token: str) -> ActivityClass:
    try:
        return _CLASS_TOKENS[token.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown activity class {token!r}") from None


def parse_criticality(token: str) -> Criticality:
    try:
        return _CRIT_TOKENS[token.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown criticality {token!r}") from None


@dataclass(frozen=True)
class FrameInsight:
    """One perceived moment, as extracted from a frame caption."""

    timestamp_ms: float
    activity_description: str
    activity_class: ActivityClass
    criticality: Criticality
    surrounding: str
    source_caption: str = ""
    carried_forward: bool = False

    def __post_init__(self):
        if not self.activity_description or not self.surrounding:
            raise ValueError("activity_description and surrounding must be non-empty")


def _sanitize(text: str) -> str:
    # the line format is delimiter-fragile; strip the delimiters out
    return text.replace("|", "/").replace("]", "/")


def format_insight_line(insight: FrameInsight) -> str:
    return (f"[{_sanitize(insight.activity_description)} | {insight.activity_class.value}"
            f" | {insight.criticality.label} | {_sanitize(insight.surrounding)}]")


def parse_insight_line(text: str):
    """Parse the first bracket-pipe line out of a model reply.

    The two rightmost fields are read positionally so stray pipes inside the
    description do not break parsing. Returns (description, class,
    criticality, surrounding) or raises ValueError.
    """
    for line in text.splitlines():
        line = line.strip()
        if not (line.startswith("[") and line.endswith("]")):
            continue
        parts = [p.strip() for p in line[1:-1].split("|")]
        if len(parts) < 4:
            continue
        try:
            klass = parse_activity_class(parts[-3])
            crit = parse_criticality(parts[-2])
        except ValueError:
            continue
        desc = " | ".join(parts[:-3]).strip()
        surrounding = parts[-1]
        if not desc or not surrounding:
            continue
        return desc, klass, crit, surrounding
    raise ValueError("no parseable insight line in model output")


class ScreenActivityBuffer:
    """Ring of the last ten screen-activity descriptions, oldest evicted first."""

    def __init__(self, capacity: int = SCREEN_BUFFER_CAPACITY):
        self.capacity = capacity
        self._entries: list[tuple[float, str]] = []
        self._lock = threading.Lock()

    def append(self, timestamp_ms: float, description: str) -> None:
        with self._lock:
            if self._entries and timestamp_ms < self._entries[-1][0]:
                raise ValueError("screen buffer timestamps must be nondecreasing")
            self._entries.append((timestamp_ms, description))
            if len(self._entries) > self.capacity:
                del self._entries[: len(self._entries) - self.capacity]

    def snapshot(self) -> list[tuple[float, str]]:
        with self._lock:
            return list(self._entries)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


_RETRY_REMINDER = (
    "\n\nYour previous output could not be parsed:\n{raw}\n"
    "Return exactly one line formatted as "
    "[<activity description> | <activity class> | <criticality> | <surrounding description>]"
)


class PerceptionPipeline:
    """Caption and insight extraction for one frame stream.

    Frames are processed strictly in order: the previous frame's parsed
    activity description feeds the next caption request. On a model outage
    the last insight is carried forward and the gap is marked.
    """

    def __init__(self, gateway: gw.Gateway, prompts: PromptCatalog,
                 caption_model: str, insight_model: str,
                 caption_timeout_s: float = 30.0, insight_timeout_s: float = 30.0):
        self._gateway = gateway
        self._prompts = prompts
        self._caption_model = caption_model
        self._insight_model = insight_model
        self._caption_timeout = caption_timeout_s
        self._insight_timeout = insight_timeout_s
        self.screen_buffer = ScreenActivityBuffer()
        self._prev_activity: str | None = None
        self._last_insight: FrameInsight | None = None

    # -- egocentric frames ------------------------------------------------

    def caption_frame(self, frame: FrameEvent, prev_activity: str | None = None) -> str:
        """Caption an egocentric frame; precomputed captions bypass the gateway."""
        if frame.source != EGOCENTRIC:
            raise ValueError("caption_frame expects an egocentric frame")
        if frame.caption is not None:
            return frame.caption
        system = fill_previous_activity(self._prompts["egocentric_caption"], prev_activity)
        req = gw.ModelRequest(kind=gw.CAPTION, model_id=self._caption_model,
                              system_prompt=system, user_content="Describe this frame.",
                              image_ref=frame.image_ref, max_latency_s=self._caption_timeout)
        return self._gateway.invoke(req).text

    def extract_insights(self, caption: str, timestamp_ms: float = 0.0) -> FrameInsight:
        """Run the insight completion and parse its bracket-pipe output.

        One re-prompt is attempted on a parse failure; after that the typed
        error carries both raw outputs.
        """
        if not caption:
            raise ValueError("caption must be non-empty")
        system = self._prompts["insight_extraction"] + "\n\n" + self._prompts["insight_fewshots"]
        user = f"Description:\n{caption}\nOutput:"
        first = self._invoke_completion(self._insight_model, system, user,
                                        self._insight_timeout)
        try:
            desc, klass, crit, surrounding = parse_insight_line(first)
        except ValueError:
            retry_user = user + _RETRY_REMINDER.format(raw=first)
            second = self._invoke_completion(self._insight_model, system, retry_user,
                                             self._insight_timeout)
            try:
                desc, klass, crit, surrounding = parse_insight_line(second)
            except ValueError:
                raise UnparseableInsight(first, second) from None
        return FrameInsight(timestamp_ms=timestamp_ms, activity_description=desc,
                            activity_class=klass, criticality=crit,
                            surrounding=surrounding, source_caption=caption)

    def process_frame(self, frame: FrameEvent) -> FrameInsight | None:
        """Caption + extract, maintaining the previous-activity chain.

        Returns None when the very first frame hits an outage (nothing to
        carry forward yet).
        """
        try:
            caption = self.caption_frame(frame, self._prev_activity)
            insight = self.extract_insights(caption, frame.timestamp_ms)
        except (gw.GatewayTimeout, UnparseableInsight) as exc:
            logger.warning("frame %.0f: carrying last insight forward (%s)",
                           frame.timestamp_ms, exc)
            if self._last_insight is None:
                return None
            insight = replace(self._last_insight, timestamp_ms=frame.timestamp_ms,
                              carried_forward=True)
        self._prev_activity = insight.activity_description
        self._last_insight = insight
        return insight

    # -- screen snapshots --------------------------------------------------

    def caption_screen(self, frame: FrameEvent) -> str:
        """Describe a screen snapshot and append it to the rolling buffer."""
        if frame.source != SCREEN:
            raise ValueError("caption_screen expects a screen frame")
        if frame.caption is not None:
            description = frame.caption
        else:
            req = gw.ModelRequest(kind=gw.CAPTION, model_id=self._caption_model,
                                  system_prompt=self._prompts["screen_caption"],
                                  user_content="Describe the on-screen activity.",
                                  image_ref=frame.image_ref,
                                  max_latency_s=self._caption_timeout)
            description = self._gateway.invoke(req).text
        self.screen_buffer.append(frame.timestamp_ms, description)
        return description

    def latest_screen_context(self) -> list[tuple[float, str]]:
        return self.screen_buffer.snapshot()

    @property
    def last_insight(self) -> FrameInsight | None:
        return self._last_insight

    def _invoke_completion(self, model: str, system: str, user: str, timeout: float) -> str:
        req = gw.ModelRequest(kind=gw.COMPLETION, model_id=model, system_prompt=system,
                              user_content=user, max_latency_s=timeout)
        return self._gateway.invoke(req).text
