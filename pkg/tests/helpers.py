"""Shared test utilities: recording gateway wrapper and trace writers."""

from __future__ import annotations

import json
from pathlib import Path

from workpulse.gateway import MockRule, mock_gateway


class RecordingGateway:
    """Wraps a gateway, capturing every outgoing request for inspection."""

    def __init__(self, inner):
        self.inner = inner
        self.requests = []

    def invoke(self, req):
        self.requests.append(req)
        return self.inner.invoke(req)

    def record_latency(self, resp):
        return self.inner.record_latency(resp)

    @property
    def latency(self):
        return self.inner.latency

    @property
    def is_mock(self):
        return self.inner.is_mock

    def last_request(self):
        return self.requests[-1]


def make_mock_gateway(rules, models=("m-test",), **kwargs):
    parsed = [r if isinstance(r, MockRule) else MockRule(**r) for r in rules]
    return mock_gateway(parsed, models, **kwargs)


def write_ecg_csv(path: Path, rows):
    lines = ["timestamp_ms,mv"] + [f"{t},{v}" for t, v in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_imu_csv(path: Path, rows):
    lines = ["timestamp_ms,ax,ay,az"] + [f"{t},{x},{y},{z}" for t, x, y, z in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_jsonl(path: Path, objs):
    path.write_text("".join(json.dumps(o) + "\n" for o in objs), encoding="utf-8")


def write_trace(tmp: Path, ecg=None, imu=None, frames=None, screens=None,
                audio=None, session_start=None) -> Path:
    tmp.mkdir(parents=True, exist_ok=True)
    if ecg is not None:
        write_ecg_csv(tmp / "ecg.csv", ecg)
    if imu is not None:
        write_imu_csv(tmp / "imu.csv", imu)
    if frames is not None:
        write_jsonl(tmp / "frames.jsonl", frames)
    if screens is not None:
        write_jsonl(tmp / "screen.jsonl", screens)
    if audio is not None:
        write_jsonl(tmp / "audio.jsonl", audio)
    if session_start is not None:
        (tmp / "manifest.json").write_text(
            json.dumps({"session_start": session_start}), encoding="utf-8")
    return tmp
