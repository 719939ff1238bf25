"""Routine table: per-interval activity minutes plus physiological metrics.

Frame insights and physiology windows aggregate into fixed-length rows
(15 minutes by default). The table is the single source of context for the
intervention and chat pipelines, and persists as an append-only JSON-lines
event log plus a checksummed snapshot.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

from .errors import CorruptStore, EmptyTable, StaleInsight, WindowMismatch
from .perception import ActivityClass, FrameInsight
from .physio import PhysioWindow, classify_stress

ACTIVITY_KEYS = ("desk_work", "commuting", "eating", "in_meeting", "other")

_CLASS_TO_KEY = {
    ActivityClass.DESK_WORK: "desk_work",
    ActivityClass.COMMUTING: "commuting",
    ActivityClass.EATING: "eating",
    ActivityClass.IN_MEETING: "in_meeting",
    ActivityClass.OTHER: "other",
}

# column order fixed by the prompt few-shots
PROMPT_HEADER = "Time,Desk Work (min),Commuting (min),Eating (min),In-Meeting (min)"
EXPORT_HEADER = ("Time Interval,Desk Work (min),Commuting (min),Eating (min),"
                 "In Meeting (min),HRV (pNN50),HR,Number of Steps")

_PROMPT_KEYS = ("desk_work", "commuting", "eating", "in_meeting")


@dataclass(frozen=True)
class RoutineRow:
    """One sealed interval: activity minutes, coverage gap, physiology."""

    start_ms: float
    end_ms: float
    label: str
    minutes: dict[str, float]
    pnn50: float | None
    mean_hr: float | None
    steps: int

    @property
    def length_minutes(self) -> float:
        return (self.end_ms - self.start_ms) / 60000.0

    @property
    def coverage_minutes(self) -> float:
        return sum(self.minutes.values())

    @property
    def gap_minutes(self) -> float:
        return self.length_minutes - self.coverage_minutes

    def to_json_obj(self) -> dict:
        return {
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "label": self.label,
            "minutes": {k: self.minutes[k] for k in ACTIVITY_KEYS},
            "pnn50": self.pnn50,
            "mean_hr": self.mean_hr,
            "steps": self.steps,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RoutineRow":
        return cls(start_ms=obj["start_ms"], end_ms=obj["end_ms"], label=obj["label"],
                   minutes={k: obj["minutes"][k] for k in ACTIVITY_KEYS},
                   pnn50=obj["pnn50"], mean_hr=obj["mean_hr"], steps=obj["steps"])


@dataclass(frozen=True)
class RoutineTable:
    session_start: datetime
    row_minutes: float
    rows: tuple[RoutineRow, ...] = ()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def interval_label(session_start: datetime, start_ms: float, end_ms: float) -> str:
    """24-hour HH:MM-HH:MM label for a row interval."""
    begin = session_start + timedelta(milliseconds=start_ms)
    finish = session_start + timedelta(milliseconds=end_ms)
    return f"{begin.strftime('%H:%M')}-{finish.strftime('%H:%M')}"


class RoutineBook:
    """Accumulates insights into the open row and seals rows on the clock tick.

    Single writer; readers take immutable snapshots. When a store directory
    is attached, every sealed row appends one canonical JSON line to
    rows.jsonl and ``flush`` writes the checksummed snapshot.
    """

    def __init__(self, session_start: datetime, row_minutes: float = 15.0):
        self.session_start = session_start
        self.row_minutes = float(row_minutes)
        self.rows: list[RoutineRow] = []
        self._row_ms = self.row_minutes * 60000.0
        self._open_start = 0.0
        self._buckets = {k: 0.0 for k in ACTIVITY_KEYS}
        self._store_dir: Path | None = None

    # -- accumulation ------------------------------------------------------

    @property
    def open_interval(self) -> tuple[float, float]:
        return (self._open_start, self._open_start + self._row_ms)

    def accumulate(self, insight: FrameInsight, cadence_s: float) -> None:
        """Credit one frame cadence of minutes to the insight's class bucket."""
        start, end = self.open_interval
        ts = insight.timestamp_ms
        if ts < start:
            raise StaleInsight(f"insight at {ts} predates open row start {start}")
        if ts >= end:
            raise WindowMismatch(f"insight at {ts} is past the open row end {end}")
        credit_ms = min(cadence_s * 1000.0, end - ts)
        self._buckets[_CLASS_TO_KEY[insight.activity_class]] += credit_ms / 60000.0

    def close_row(self, physio: PhysioWindow) -> RoutineRow:
        """Seal the open row with physiology metrics and open the next one."""
        start, end = self.open_interval
        if physio.window != (start, end):
            raise WindowMismatch(
                f"physio window {physio.window} does not match open row ({start}, {end})")
        row = RoutineRow(
            start_ms=start, end_ms=end,
            label=interval_label(self.session_start, start, end),
            minutes=dict(self._buckets),
            pnn50=physio.pnn50 if physio.valid else None,
            mean_hr=physio.mean_hr if physio.valid else None,
            steps=physio.steps,
        )
        self.rows.append(row)
        self._open_start = end
        self._buckets = {k: 0.0 for k in ACTIVITY_KEYS}
        if self._store_dir is not None:
            with open(self._store_dir / "rows.jsonl", "a", encoding="utf-8") as fh:
                fh.write(_canonical(row.to_json_obj()) + "\n")
        return row

    def snapshot(self) -> RoutineTable:
        return RoutineTable(session_start=self.session_start,
                            row_minutes=self.row_minutes, rows=tuple(self.rows))

    # -- rendering -----------------------------------------------------------

    def render_for_prompt(self, last_n: int, hrv: str = "none",
                          extended: bool = False) -> str:
        """CSV block of the last n rows in the prompt column order.

        hrv="none" omits physiology entirely (the intervention pipeline must
        never see it); "numeric" appends pNN50/HR columns; "stress" appends a
        per-row stress_level token derived from pNN50.
        """
        return render_rows(self.snapshot(), last_n, hrv=hrv, extended=extended)

    def to_export_csv(self) -> str:
        return export_csv(self.snapshot())

    # -- persistence -----------------------------------------------------------

    def attach_store(self, store_dir) -> None:
        """Start appending sealed rows under ``store_dir`` (created if needed)."""
        path = Path(store_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / "rows.jsonl").write_text(
            "".join(_canonical(r.to_json_obj()) + "\n" for r in self.rows),
            encoding="utf-8")
        self._store_dir = path

    def flush(self) -> None:
        if self._store_dir is not None:
            persist(self.snapshot(), self._store_dir)


def render_rows(table: RoutineTable, last_n: int, hrv: str = "none",
                extended: bool = False) -> str:
    if last_n < 1:
        raise ValueError("last_n must be >= 1")
    if not table.rows:
        raise EmptyTable("routine table has no sealed rows")
    if hrv not in ("none", "numeric", "stress"):
        raise ValueError(f"unknown hrv mode {hrv!r}")

    header = PROMPT_HEADER
    if extended:
        header += ",Other (min)"
    if hrv == "numeric":
        header += ",HRV (pNN50),HR"
    elif hrv == "stress":
        header += ",stress_level"

    lines = [header]
    for row in table.rows[-last_n:]:
        cells = [row.label]
        cells += [str(int(round(row.minutes[k]))) for k in _PROMPT_KEYS]
        if extended:
            cells.append(str(int(round(row.minutes["other"]))))
        if hrv == "numeric":
            cells.append("NA" if row.pnn50 is None else f"{row.pnn50:.2f}")
            cells.append("NA" if row.mean_hr is None else str(int(round(row.mean_hr))))
        elif hrv == "stress":
            token = "unknown" if row.pnn50 is None else classify_stress(row.pnn50).value.lower()
            cells.append(token)
        lines.append(",".join(cells))
    return "\n".join(lines)


def export_csv(table: RoutineTable) -> str:
    """Full-table CSV export with the canonical column names."""
    lines = [EXPORT_HEADER]
    for row in table.rows:
        cells = [row.label]
        cells += [str(int(round(row.minutes[k]))) for k in _PROMPT_KEYS]
        cells.append("" if row.pnn50 is None else f"{row.pnn50:.2f}")
        cells.append("" if row.mean_hr is None else str(int(round(row.mean_hr))))
        cells.append(str(row.steps))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _table_payload(table: RoutineTable) -> dict:
    return {
        "meta": {
            "session_start": table.session_start.isoformat(),
            "row_minutes": table.row_minutes,
        },
        "rows": [r.to_json_obj() for r in table.rows],
    }


def persist(table: RoutineTable, store_dir) -> None:
    """Write rows.jsonl plus a sha256-checksummed snapshot.json."""
    path = Path(store_dir)
    path.mkdir(parents=True, exist_ok=True)
    (path / "rows.jsonl").write_text(
        "".join(_canonical(r.to_json_obj()) + "\n" for r in table.rows),
        encoding="utf-8")
    payload = _table_payload(table)
    digest = hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()
    snapshot = {"sha256": digest, **payload}
    (path / "snapshot.json").write_text(_canonical(snapshot) + "\n", encoding="utf-8")


def load(store_dir) -> RoutineTable:
    """Load and verify a persisted table; any inconsistency is CorruptStore."""
    path = Path(store_dir)
    snap_path = path / "snapshot.json"
    try:
        snapshot = json.loads(snap_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptStore(f"unreadable snapshot: {exc}") from None
    try:
        digest = snapshot.pop("sha256")
    except KeyError:
        raise CorruptStore("snapshot missing checksum") from None
    if hashlib.sha256(_canonical(snapshot).encode("utf-8")).hexdigest() != digest:
        raise CorruptStore("snapshot checksum mismatch")

    try:
        rows = tuple(RoutineRow.from_json_obj(o) for o in snapshot["rows"])
        meta = snapshot["meta"]
        table = RoutineTable(session_start=datetime.fromisoformat(meta["session_start"]),
                             row_minutes=float(meta["row_minutes"]), rows=rows)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptStore(f"bad snapshot contents: {exc}") from None

    log_path = path / "rows.jsonl"
    if log_path.exists():
        with open(log_path, encoding="utf-8") as fh:
            n_lines = sum(1 for line in fh if line.strip())
        if n_lines != len(rows):
            raise CorruptStore(f"event log holds {n_lines} rows, snapshot {len(rows)}")
    return table
