"""Synthetic signal and trace generation.

The ECG/IMU generators keep their ground truth (beat times, step cycles) so
tests can score detection accuracy against what was actually synthesized.
``build_day_trace`` writes a fully deterministic multi-hour trace plus the
mock rule set that drives every model call during its replay.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

ECG_FS = 200.0
IMU_FS = 50.0


def synth_ecg(beat_times_ms, fs: float = ECG_FS, noise_snr_db: float | None = None,
              seed: int = 0, span_ms: float | None = None):
    """Render an ECG-like trace with beats at the given times.

    Each beat is a sharp R spike flanked by Q/S dips plus P and T waves.
    Returns (timestamps_ms, millivolts); ``beat_times_ms`` is the ground
    truth for peak detection.
    """
    beat_times_ms = np.asarray(beat_times_ms, dtype=float)
    end = span_ms if span_ms is not None else (beat_times_ms.max() + 500.0)
    ts = np.arange(0.0, end + 1e-9, 1000.0 / fs)
    mv = np.zeros_like(ts)

    def bump(center_ms, amplitude, sigma_ms):
        lo = np.searchsorted(ts, center_ms - 4 * sigma_ms)
        hi = np.searchsorted(ts, center_ms + 4 * sigma_ms)
        seg = ts[lo:hi]
        mv[lo:hi] += amplitude * np.exp(-0.5 * ((seg - center_ms) / sigma_ms) ** 2)

    for beat in beat_times_ms:
        bump(beat - 200.0, 0.15, 30.0)   # P
        bump(beat - 30.0, -0.15, 8.0)    # Q
        bump(beat, 1.0, 10.0)            # R
        bump(beat + 30.0, -0.20, 8.0)    # S
        bump(beat + 250.0, 0.30, 50.0)   # T

    if noise_snr_db is not None:
        rng = np.random.default_rng(seed)
        signal_power = float(np.mean(mv ** 2))
        noise_power = signal_power / (10.0 ** (noise_snr_db / 10.0))
        mv = mv + rng.normal(0.0, np.sqrt(noise_power), size=mv.shape)
    return ts, mv


def rr_walk(start_ms: float, end_ms: float, mean_rr_ms: float, jitter_ms: float,
            seed: int = 0) -> np.ndarray:
    """Beat times from a bounded random walk around a mean RR interval.

    ``jitter_ms`` is the scale of successive-interval changes: small values
    give low pNN50 (stressed), large values high pNN50 (relaxed).
    """
    rng = np.random.default_rng(seed)
    beats = [start_ms + mean_rr_ms]
    rr = mean_rr_ms
    lo, hi = 0.7 * mean_rr_ms, 1.3 * mean_rr_ms
    while beats[-1] + rr < end_ms:
        rr = float(np.clip(rr + rng.normal(0.0, jitter_ms), lo, hi))
        # pull gently back to the mean so the walk does not stick at a bound
        rr += 0.1 * (mean_rr_ms - rr)
        beats.append(beats[-1] + rr)
    return np.asarray(beats)


def synth_still_imu(start_ms: float, end_ms: float, fs: float = IMU_FS):
    """Gravity-only accelerometer rows (no steps)."""
    ts = np.arange(start_ms, end_ms, 1000.0 / fs)
    acc = np.zeros((len(ts), 3))
    acc[:, 2] = 9.81
    return ts, acc


def synth_walk_imu(start_ms: float, end_ms: float, cadence_hz: float = 1.8,
                   amplitude: float = 3.0, fs: float = IMU_FS):
    """Walking accelerometer rows; ground-truth steps = cadence x duration."""
    ts = np.arange(start_ms, end_ms, 1000.0 / fs)
    t_s = (ts - start_ms) / 1000.0
    acc = np.zeros((len(ts), 3))
    acc[:, 2] = 9.81 + amplitude * np.sin(2 * np.pi * cadence_hz * t_s)
    steps = int(cadence_hz * (end_ms - start_ms) / 1000.0)
    return ts, acc, steps


# -- bundled synthetic day ------------------------------------------------------

# per-block schedule: (caption, insight line, screen description, walking?)
_DESK = ("The user is writing code on a laptop at an office desk with two monitors.",
         "[writing code on a laptop | Desk_Work | Mid | office desk with two monitors]",
         "An IDE window with a failing unit test open.", False)
_MEETING = ("The user is at a conference table while a colleague presents slides.",
            "[attending a presentation | In_Meeting | High | conference room with a projector screen]",
            "A slide deck in presentation mode.", False)
_COMMUTE = ("The user is walking along an office corridor holding a phone.",
            "[walking down a corridor | Commuting | Mid | office corridor with glass doors]",
            "A mobile calendar app showing the next meeting.", True)
_EATING = ("The user is having lunch at a cafeteria table with a tray of food.",
           "[eating lunch at a table | Eating | Low | cafeteria table with a food tray]",
           "A news article open in a browser.", False)

# two-hour arc: focus, meeting, walk, lunch, focus, meeting
_BLOCK_KINDS = [_DESK, _DESK, _MEETING, _COMMUTE, _EATING, _DESK, _DESK, _MEETING]

# stressed blocks get small RR jitter (low pNN50), relaxed blocks large
_BLOCK_JITTER = [12.0, 12.0, 8.0, 30.0, 60.0, 40.0, 12.0, 8.0]

_EMAIL_TRANSCRIPT = ("please email the quarterly metrics deck to the finance team "
                     "with a short summary")
_CALENDAR_TRANSCRIPT = ("let us schedule a design sync with Priya tomorrow at 3pm "
                        "for thirty minutes")
_CHATTER_TRANSCRIPT = "that coffee machine is finally fixed"

_EMAIL_ACTION = json.dumps([{
    "kind": "email",
    "recipient_hint": "the finance team",
    "subject": "Quarterly metrics deck",
    "body_draft": "Hi all, sharing the quarterly metrics deck with a short summary.",
    "confidence": "explicit",
}])

_CALENDAR_ACTION = json.dumps([{
    "kind": "calendar_event",
    "title": "Design sync with Priya",
    "start": "tomorrow at 3pm",
    "duration_minutes": 30,
    "attendees_hint": "Priya",
    "confidence": "explicit",
}])

_INTERVENTION_OUTPUT = json.dumps({
    "Analysis": ("Long stretches of focused desk work with little movement "
                 "raise stiffness and eye strain risk."),
    "Interventions": {
        "Immediate Action": "Stand up, roll your shoulders, and stretch for two minutes.",
        "Follow-Up": "Walk to refill your water bottle after the next work block.",
    },
})

_CHAT_REPLY = ("You have been at it for a while; a short reset will keep your "
               "focus sharp. What are you working on?")


def day_mock_rules() -> list[dict]:
    """Mock rule set covering every model call the bundled day trace makes."""
    rules = []
    priority = 100
    for caption, line, _, _ in (_DESK, _MEETING, _COMMUTE, _EATING):
        matcher = caption.split(". ")[0][:40]
        rules.append({"matcher": matcher, "response": line,
                      "priority": priority, "latency_s": 1.69})
        priority += 1
    rules.append({"matcher": "quarterly metrics deck to the finance",
                  "response": _EMAIL_ACTION, "priority": 200, "latency_s": 1.1})
    rules.append({"matcher": "design sync with Priya",
                  "response": _CALENDAR_ACTION, "priority": 201, "latency_s": 1.2})
    rules.append({"matcher": "scan one-minute workplace audio transcripts",
                  "response": "[]", "priority": 10, "latency_s": 0.9})
    rules.append({"matcher": "workplace wellness assistant",
                  "response": _INTERVENTION_OUTPUT, "priority": 20, "latency_s": 8.2})
    rules.append({"matcher": "sophisticated assistant",
                  "response": _CHAT_REPLY, "priority": 30, "latency_s": 2.4})
    return rules


def build_day_trace(trace_dir, hours: float = 2.0, seed: int = 7,
                    session_start: str = "2024-06-03T10:00:00",
                    block_minutes: float = 15.0) -> dict:
    """Write a deterministic synthetic day under ``trace_dir``.

    Returns a manifest of ground-truth facts (beats per block, steps,
    actionable segments) for tests to assert against.
    """
    base = Path(trace_dir)
    base.mkdir(parents=True, exist_ok=True)
    span_ms = hours * 3600_000.0
    block_ms = block_minutes * 60_000.0
    n_blocks = int(round(span_ms / block_ms))

    # ECG: one bounded RR walk per block, stitched together
    beats = []
    for b in range(n_blocks):
        jitter = _BLOCK_JITTER[b % len(_BLOCK_JITTER)]
        beats.append(rr_walk(b * block_ms, (b + 1) * block_ms, mean_rr_ms=800.0,
                             jitter_ms=jitter, seed=seed * 1000 + b))
    beat_times = np.concatenate(beats)
    ecg_ts, ecg_mv = synth_ecg(beat_times, noise_snr_db=20.0, seed=seed,
                               span_ms=span_ms)
    with open(base / "ecg.csv", "w", encoding="utf-8") as fh:
        fh.write("timestamp_ms,mv\n")
        fh.write("\n".join(f"{t:.1f},{v:.4f}" for t, v in zip(ecg_ts, ecg_mv)))
        fh.write("\n")

    # IMU: still except during walking blocks
    imu_parts = []
    true_steps = {}
    for b in range(n_blocks):
        kind = _BLOCK_KINDS[b % len(_BLOCK_KINDS)]
        lo, hi = b * block_ms, (b + 1) * block_ms
        if kind[3]:
            ts, acc, steps = synth_walk_imu(lo, hi)
            true_steps[b] = steps
        else:
            ts, acc = synth_still_imu(lo, hi)
            true_steps[b] = 0
        imu_parts.append((ts, acc))
    with open(base / "imu.csv", "w", encoding="utf-8") as fh:
        fh.write("timestamp_ms,ax,ay,az\n")
        for ts, acc in imu_parts:
            fh.write("\n".join(f"{t:.1f},{a[0]:.4f},{a[1]:.4f},{a[2]:.4f}"
                               for t, a in zip(ts, acc)))
            fh.write("\n")

    # frames + screen snapshots every 60 s, precomputed captions
    frames, screens = [], []
    frame_cadence_ms = 60_000.0
    t = 0.0
    while t < span_ms:
        b = int(t // block_ms)
        caption, _, screen_desc, _ = _BLOCK_KINDS[b % len(_BLOCK_KINDS)]
        frames.append({"ts_ms": t, "caption": caption})
        screens.append({"ts_ms": t, "caption": screen_desc})
        t += frame_cadence_ms
    (base / "frames.jsonl").write_text(
        "".join(json.dumps(f) + "\n" for f in frames), encoding="utf-8")
    (base / "screen.jsonl").write_text(
        "".join(json.dumps(s) + "\n" for s in screens), encoding="utf-8")

    # audio: one-minute segments; mostly silence, some chatter, two actionable
    segments = []
    actionable = {}
    seg_ms = 60_000.0
    n_segments = int(span_ms // seg_ms)
    for i in range(n_segments):
        start = i * seg_ms
        if i == 40:
            transcript = _EMAIL_TRANSCRIPT
            actionable[i] = "email"
        elif i == 75:
            transcript = _CALENDAR_TRANSCRIPT
            actionable[i] = "calendar_event"
        elif i % 17 == 3:
            transcript = _CHATTER_TRANSCRIPT
        else:
            transcript = ""
        segments.append({"start_ms": start, "dur_ms": seg_ms, "transcript": transcript})
    (base / "audio.jsonl").write_text(
        "".join(json.dumps(s) + "\n" for s in segments), encoding="utf-8")

    (base / "manifest.json").write_text(
        json.dumps({"session_start": session_start}) + "\n", encoding="utf-8")
    (base / "mock_rules.json").write_text(
        json.dumps(day_mock_rules(), indent=2) + "\n", encoding="utf-8")

    return {
        "span_ms": span_ms,
        "n_blocks": n_blocks,
        "beat_times_ms": beat_times,
        "true_steps": true_steps,
        "actionable_segments": actionable,
        "n_frames": len(frames),
        "mock_rules_path": str(base / "mock_rules.json"),
    }
