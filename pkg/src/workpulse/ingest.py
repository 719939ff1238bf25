"""Sensor-source abstraction: replays recorded trace files on a virtual clock.

A trace directory may contain any subset of ecg.csv, imu.csv, frames.jsonl,
screen.jsonl and audio.jsonl plus an optional manifest.json carrying the
session's wall-clock start. Live adapters must emit the same formats; the
deterministic core only ever sees these files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import MalformedTrace, NonMonotonicTimestamps, SessionClosed

EGOCENTRIC = "egocentric"
SCREEN = "screen"

ECG_NOMINAL_HZ = 200.0
ECG_GAP_FLAG_MS = 2 * (1000.0 / ECG_NOMINAL_HZ)  # > 2x nominal period

# fallback when a trace carries no manifest; keeps table labels well-defined
DEFAULT_SESSION_START = datetime(2024, 1, 1, 9, 0, 0)

# deterministic ordering for events sharing a timestamp
_STREAM_RANK = {"ecg": 0, "imu": 1, "frame": 2, "screen": 3, "audio": 4}


@dataclass(frozen=True)
class EcgSample:
    timestamp_ms: float
    mv: float


@dataclass(frozen=True)
class ImuSample:
    timestamp_ms: float
    accel: tuple[float, float, float]


@dataclass(frozen=True)
class FrameEvent:
    timestamp_ms: float
    source: str
    image_ref: str | None = None
    caption: str | None = None

    def __post_init__(self):
        if (self.image_ref is None) == (self.caption is None):
            raise ValueError("exactly one of image_ref / caption must be present")
        if self.source not in (EGOCENTRIC, SCREEN):
            raise ValueError(f"unknown frame source {self.source!r}")


@dataclass(frozen=True)
class AudioSegment:
    start_ms: float
    duration_ms: float
    audio_ref: str | None = None
    transcript: str | None = None

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ValueError("duration must be positive")
        if (self.audio_ref is None) == (self.transcript is None):
            raise ValueError("exactly one of audio_ref / transcript must be present")

    @property
    def end_ms(self) -> float:
        return self.start_ms + self.duration_ms


def _load_csv_columns(path: Path, expected_header: str) -> np.ndarray:
    """Read a numeric CSV into a 2-D array, locating errors by physical line."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != expected_header:
            raise MalformedTrace(path, 1, f"expected header {expected_header!r}, got {header!r}")
        ncols = len(expected_header.split(","))
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=np.float64)
        except ValueError:
            pass  # fall through to the slow path for a precise line number
        else:
            if data.size == 0:
                return np.empty((0, ncols))
            if data.shape[1] != ncols:
                raise MalformedTrace(path, 2, f"expected {ncols} columns")
            return data
    # slow path: find the offending line
    rows = []
    with open(path, encoding="utf-8") as fh:
        fh.readline()
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != ncols:
                raise MalformedTrace(path, lineno, f"expected {ncols} columns, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise MalformedTrace(path, lineno, f"non-numeric field in {line!r}") from None
    return np.asarray(rows, dtype=np.float64).reshape(-1, ncols)


def _check_monotonic(ts: np.ndarray, path: Path) -> None:
    if len(ts) < 2:
        return
    bad = np.nonzero(np.diff(ts) < 0)[0]
    if bad.size:
        row = int(bad[0]) + 2  # 1-based data row of the decreasing value
        raise NonMonotonicTimestamps(path, line=row + 1, row=row)


def _load_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedTrace(path, lineno, f"invalid JSON: {exc}") from None


def _load_frames(path: Path, source: str) -> list[FrameEvent]:
    events, prev_ts = [], None
    for lineno, obj in _load_jsonl(path):
        try:
            ts = float(obj["ts_ms"])
        except (KeyError, TypeError, ValueError):
            raise MalformedTrace(path, lineno, "missing or bad ts_ms") from None
        try:
            ev = FrameEvent(timestamp_ms=ts, source=source,
                            image_ref=obj.get("image_ref"), caption=obj.get("caption"))
        except ValueError as exc:
            raise MalformedTrace(path, lineno, str(exc)) from None
        if prev_ts is not None and ts < prev_ts:
            raise NonMonotonicTimestamps(path, line=lineno, row=len(events) + 1)
        prev_ts = ts
        events.append(ev)
    return events


def _load_audio(path: Path) -> list[AudioSegment]:
    segments, prev_end = [], None
    for lineno, obj in _load_jsonl(path):
        try:
            seg = AudioSegment(start_ms=float(obj["start_ms"]),
                               duration_ms=float(obj["dur_ms"]),
                               audio_ref=obj.get("audio_ref"),
                               transcript=obj.get("transcript"))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedTrace(path, lineno, str(exc)) from None
        if prev_end is not None and seg.start_ms < prev_end:
            raise MalformedTrace(path, lineno, "audio segments overlap")
        prev_end = seg.end_ms
        segments.append(seg)
    return segments


def _load_manifest(path: Path) -> datetime:
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
        return datetime.fromisoformat(obj["session_start"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise MalformedTrace(path, 1, f"bad manifest: {exc}") from None


class TraceSession:
    """Typed event streams merged on the virtual clock.

    ``next_events`` delivers every event exactly once in timestamp order,
    regardless of poll granularity. Dense streams (ECG, IMU) can also be read
    through the bulk ``*_between`` views, which slice by timestamp and do not
    advance the per-stream cursors. A session is single-consumer.
    """

    def __init__(self, ecg: np.ndarray, imu: np.ndarray,
                 frames: list[FrameEvent], screens: list[FrameEvent],
                 audio: list[AudioSegment], session_start: datetime):
        self._ecg = ecg          # columns: ts, mv
        self._imu = imu          # columns: ts, ax, ay, az
        self._frames = frames
        self._screens = screens
        self._audio = audio
        self.session_start = session_start
        self._cursors = {name: 0 for name in _STREAM_RANK}
        self._last_until = -np.inf
        self._closed = False

        gaps = []
        if len(ecg) >= 2:
            dts = np.diff(ecg[:, 0])
            for idx in np.nonzero(dts > ECG_GAP_FLAG_MS)[0]:
                gaps.append((float(ecg[idx, 0]), float(dts[idx])))
        self.ecg_gaps = gaps

        spans = [0.0]
        if len(ecg):
            spans.append(float(ecg[-1, 0]))
        if len(imu):
            spans.append(float(imu[-1, 0]))
        if frames:
            spans.append(frames[-1].timestamp_ms)
        if screens:
            spans.append(screens[-1].timestamp_ms)
        if audio:
            spans.append(audio[-1].end_ms)
        self.span_ms = max(spans)

    def next_events(self, until: float, streams=None) -> list[tuple[float, str, object]]:
        """All not-yet-delivered events with timestamp <= ``until``, in order."""
        if self._closed:
            raise SessionClosed("session is closed")
        if until < self._last_until:
            raise ValueError("until must not move backwards")
        self._last_until = until
        wanted = _STREAM_RANK.keys() if streams is None else streams
        out = []
        for name in wanted:
            cur = self._cursors[name]
            if name == "ecg":
                stop = int(np.searchsorted(self._ecg[:, 0], until, side="right"))
                out.extend((float(r[0]), "ecg", EcgSample(float(r[0]), float(r[1])))
                           for r in self._ecg[cur:stop])
            elif name == "imu":
                stop = int(np.searchsorted(self._imu[:, 0], until, side="right"))
                out.extend((float(r[0]), "imu",
                            ImuSample(float(r[0]), (float(r[1]), float(r[2]), float(r[3]))))
                           for r in self._imu[cur:stop])
            elif name == "frame":
                stop = cur
                while stop < len(self._frames) and self._frames[stop].timestamp_ms <= until:
                    stop += 1
                out.extend((ev.timestamp_ms, "frame", ev) for ev in self._frames[cur:stop])
            elif name == "screen":
                stop = cur
                while stop < len(self._screens) and self._screens[stop].timestamp_ms <= until:
                    stop += 1
                out.extend((ev.timestamp_ms, "screen", ev) for ev in self._screens[cur:stop])
            elif name == "audio":
                stop = cur
                while stop < len(self._audio) and self._audio[stop].start_ms <= until:
                    stop += 1
                out.extend((seg.start_ms, "audio", seg) for seg in self._audio[cur:stop])
            else:
                raise ValueError(f"unknown stream {name!r}")
            self._cursors[name] = stop
        out.sort(key=lambda item: (item[0], _STREAM_RANK[item[1]]))
        return out

    def ecg_between(self, start_ms: float, end_ms: float) -> tuple[np.ndarray, np.ndarray]:
        """(timestamps, millivolts) with start <= ts < end; read-only views."""
        ts = self._ecg[:, 0]
        lo = int(np.searchsorted(ts, start_ms, side="left"))
        hi = int(np.searchsorted(ts, end_ms, side="left"))
        return ts[lo:hi], self._ecg[lo:hi, 1]

    def imu_between(self, start_ms: float, end_ms: float) -> tuple[np.ndarray, np.ndarray]:
        """(timestamps, accel[n,3]) with start <= ts < end."""
        ts = self._imu[:, 0]
        lo = int(np.searchsorted(ts, start_ms, side="left"))
        hi = int(np.searchsorted(ts, end_ms, side="left"))
        return ts[lo:hi], self._imu[lo:hi, 1:4]

    def close(self) -> None:
        self._closed = True


def open_trace(trace_dir) -> TraceSession:
    """Open a trace directory; missing files yield empty streams."""
    base = Path(trace_dir)
    ecg_path, imu_path = base / "ecg.csv", base / "imu.csv"

    ecg = np.empty((0, 2))
    if ecg_path.exists():
        ecg = _load_csv_columns(ecg_path, "timestamp_ms,mv")
        _check_monotonic(ecg[:, 0], ecg_path)

    imu = np.empty((0, 4))
    if imu_path.exists():
        imu = _load_csv_columns(imu_path, "timestamp_ms,ax,ay,az")
        _check_monotonic(imu[:, 0], imu_path)

    frames_path = base / "frames.jsonl"
    frames = _load_frames(frames_path, EGOCENTRIC) if frames_path.exists() else []
    screen_path = base / "screen.jsonl"
    screens = _load_frames(screen_path, SCREEN) if screen_path.exists() else []
    audio_path = base / "audio.jsonl"
    audio = _load_audio(audio_path) if audio_path.exists() else []

    manifest_path = base / "manifest.json"
    session_start = _load_manifest(manifest_path) if manifest_path.exists() else DEFAULT_SESSION_START

    return TraceSession(ecg, imu, frames, screens, audio, session_start)
