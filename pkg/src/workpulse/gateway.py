"""Single access point for text-generation and captioning models.

Every pipeline issues model calls through :class:`Gateway`; nothing else in
the engine talks to a model endpoint. A request routes either to a live HTTP
backend or to a deterministic rule-matched mock, and running latency
statistics are kept per (kind, model_id).
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, GatewayTimeout, MockMiss, NoRouteForModel

CAPTION = "caption"
COMPLETION = "completion"

LIVE = "live"
MOCK = "mock"

DEFAULT_MAX_LATENCY_S = 30.0


@dataclass(frozen=True)
class ModelRequest:
    """One model invocation. ``image_ref`` is present exactly for captions."""

    kind: str
    model_id: str
    system_prompt: str
    user_content: str
    image_ref: str | None = None
    max_latency_s: float = DEFAULT_MAX_LATENCY_S

    def __post_init__(self) -> None:
        if self.kind not in (CAPTION, COMPLETION):
            raise ValueError(f"unknown request kind: {self.kind!r}")
        if not self.system_prompt:
            raise ValueError("system_prompt must be non-empty")
        if self.kind == CAPTION and self.image_ref is None:
            raise ValueError("caption requests need an image_ref")
        if self.kind == COMPLETION and self.image_ref is not None:
            raise ValueError("completion requests must not carry an image_ref")


@dataclass(frozen=True)
class ModelResponse:
    text: str
    latency_s: float
    backend: str
    kind: str
    model_id: str

    def __post_init__(self) -> None:
        if self.latency_s < 0:
            raise ValueError("latency must be nonnegative")


@dataclass(frozen=True)
class MockRule:
    """Substring matcher over (system_prompt + user_content) with a canned reply.

    ``latency_s`` is the latency the rule simulates; it is recorded in the
    stats book but never slept, so replays stay fast and deterministic.
    """

    matcher: str
    response: str
    priority: int
    latency_s: float = 0.0


class MockBackend:
    """Deterministic stand-in: highest-priority matching rule wins."""

    def __init__(self, rules):
        rules = tuple(sorted(rules, key=lambda r: -r.priority))
        priorities = [r.priority for r in rules]
        if len(set(priorities)) != len(priorities):
            raise ConfigError("mock rule priorities must be unique")
        self.rules = rules  # immutable after load

    def send(self, req: ModelRequest) -> tuple[str, float]:
        haystack = req.system_prompt + "\n" + req.user_content
        for rule in self.rules:
            if rule.matcher in haystack:
                return rule.response, rule.latency_s
        raise MockMiss(
            f"no mock rule matches request (kind={req.kind}, model={req.model_id}); "
            "the test fixture is missing a rule"
        )


def load_mock_rules(path) -> tuple[MockRule, ...]:
    """Read a JSON array of {matcher, response, priority[, latency_s]}."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ConfigError("mock rules file must hold a JSON array")
    rules = []
    for i, entry in enumerate(raw):
        try:
            rules.append(
                MockRule(
                    matcher=entry["matcher"],
                    response=entry["response"],
                    priority=int(entry["priority"]),
                    latency_s=float(entry.get("latency_s", 0.0)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad mock rule at index {i}: {exc}") from exc
    return tuple(rules)


class LiveBackend:
    """Chat-completions-style HTTP JSON backend.

    ``send`` is injectable so timeout and retry behaviour can be tested
    without a server; the default posts with httpx. Images and audio cross
    this boundary as opaque references only.
    """

    def __init__(self, url: str, auth_token: str | None = None,
                 temperature: float = 0.0, send=None):
        self.url = url
        self.temperature = temperature
        self._auth = auth_token or os.environ.get("WORKPULSE_MODEL_TOKEN")
        self._send = send or self._http_send

    def _http_send(self, payload: dict, timeout_s: float) -> str:
        import httpx  # deferred so the mock path never needs it

        headers = {"content-type": "application/json"}
        if self._auth:
            headers["authorization"] = f"Bearer {self._auth}"
        resp = httpx.post(self.url, json=payload, headers=headers, timeout=timeout_s)
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]

    def send(self, req: ModelRequest, timeout_s: float) -> str:
        payload = {
            "model": req.model_id,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_content},
            ],
        }
        if req.image_ref is not None:
            payload["image_ref"] = req.image_ref
        return self._send(payload, timeout_s)


class LatencyBook:
    """Running latency mean/max per (kind, model_id); thread safe."""

    def __init__(self):
        self._stats = {}
        self._lock = threading.Lock()

    def record(self, kind: str, model_id: str, latency_s: float) -> dict:
        with self._lock:
            entry = self._stats.setdefault((kind, model_id),
                                           {"count": 0, "total": 0.0, "max": 0.0})
            entry["count"] += 1
            entry["total"] += latency_s
            entry["max"] = max(entry["max"], latency_s)
            return self._entry_view(kind, model_id, entry)

    @staticmethod
    def _entry_view(kind, model_id, entry) -> dict:
        return {
            "kind": kind,
            "model_id": model_id,
            "count": entry["count"],
            "mean_s": entry["total"] / entry["count"],
            "max_s": entry["max"],
        }

    def mean(self, kind: str, model_id: str) -> float | None:
        """Mean latency, or None when no samples exist (never a fake zero)."""
        with self._lock:
            entry = self._stats.get((kind, model_id))
            if entry is None:
                return None
            return entry["total"] / entry["count"]

    def snapshot(self) -> list[dict]:
        with self._lock:
            return [self._entry_view(k, m, e)
                    for (k, m), e in sorted(self._stats.items())]


class Gateway:
    """Routes requests to a backend with bounded attempts and latency accounting.

    ``max_attempts`` caps total tries against a live backend (the mock never
    retries: it is deterministic). Total elapsed time stays under
    attempts x max_latency plus backoff slack.
    """

    def __init__(self, backend, known_models, max_attempts: int = 2,
                 backoff_s: float = 1.0, sleep=time.sleep, clock=time.monotonic):
        self._backend = backend
        self._known = frozenset(known_models)
        self._max_attempts = max_attempts
        self._backoff_s = backoff_s
        self._sleep = sleep
        self._clock = clock
        self.latency = LatencyBook()

    @property
    def is_mock(self) -> bool:
        return isinstance(self._backend, MockBackend)

    def invoke(self, req: ModelRequest) -> ModelResponse:
        if req.model_id not in self._known:
            raise NoRouteForModel(f"no route configured for model {req.model_id!r}")
        if self.is_mock:
            text, latency = self._backend.send(req)
            resp = ModelResponse(text, latency, MOCK, req.kind, req.model_id)
            self.record_latency(resp)
            return resp
        return self._invoke_live(req)

    def _invoke_live(self, req: ModelRequest) -> ModelResponse:
        start = self._clock()
        last_exc = None
        for attempt in range(self._max_attempts):
            if req.max_latency_s <= 0:
                break
            try:
                text = self._backend.send(req, timeout_s=req.max_latency_s)
                resp = ModelResponse(text, self._clock() - start, LIVE,
                                     req.kind, req.model_id)
                self.record_latency(resp)
                return resp
            except Exception as exc:
                last_exc = exc
                if attempt + 1 < self._max_attempts:
                    self._sleep(self._backoff_s * (2 ** attempt))
        raise GatewayTimeout(
            f"no response for model {req.model_id!r} within {req.max_latency_s}s "
            f"after {self._max_attempts} attempts"
        ) from last_exc

    def record_latency(self, resp: ModelResponse) -> dict:
        return self.latency.record(resp.kind, resp.model_id, resp.latency_s)


def mock_gateway(rules, known_models, **kwargs) -> Gateway:
    return Gateway(MockBackend(rules), known_models, **kwargs)


def live_gateway(url, known_models, auth_token=None, temperature=0.0, **kwargs) -> Gateway:
    return Gateway(LiveBackend(url, auth_token, temperature), known_models, **kwargs)
