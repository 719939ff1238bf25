"""ECG and IMU feature extraction.

R-peak detection follows the classic recipe: band-pass 5-15 Hz, squaring,
moving-window integration, adaptive threshold at 0.6 x the rolling 2-second
maximum, 200 ms refractory period. Step counting is peak detection on the
gravity-removed acceleration magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d
from scipy.signal import butter, filtfilt, find_peaks

from .errors import FlatSignal, InsufficientData

RR_MIN_MS = 250.0
RR_MAX_MS = 3000.0
REFRACTORY_MS = 200.0
FLAT_PTP_MV = 0.05
NOMINAL_FS = 200.0
GAP_SPLIT_MS = 2000.0  # ECG gaps longer than this split the analysis window

STEP_THRESHOLD_MS2 = 1.2
STEP_MIN_GAP_MS = 250.0
PNN_THRESHOLD_MS = 50.0


class StressLevel(Enum):
    HIGH = "High"
    MODERATE = "Moderate"
    LOW = "Low"


@dataclass(frozen=True)
class RrSeries:
    """Successive inter-beat intervals (ms) inside one window.

    Intervals outside [250, 3000] ms are physiologically implausible; they
    are dropped (never clamped) and counted in ``dropped``.
    """

    window: tuple[float, float]
    intervals: tuple[float, ...]
    dropped: int = 0

    @classmethod
    def from_peaks(cls, peak_ts: Sequence[float], window: tuple[float, float]) -> "RrSeries":
        raw = np.diff(np.asarray(peak_ts, dtype=float))
        keep = (raw >= RR_MIN_MS) & (raw <= RR_MAX_MS)
        return cls(window=window, intervals=tuple(float(v) for v in raw[keep]),
                   dropped=int((~keep).sum()))


@dataclass(frozen=True)
class PhysioWindow:
    """Stress and movement metrics over one time window.

    ``valid`` is False when fewer than two usable RR intervals exist (or the
    derived heart rate is implausible); pnn50 and mean_hr are then absent.
    """

    window: tuple[float, float]
    pnn50: float | None
    mean_hr: float | None
    steps: int
    valid: bool
    rr_dropped: int = 0


def compute_pnn50(rr: RrSeries) -> float:
    """Percentage of successive interval pairs differing by more than 50 ms."""
    n = len(rr.intervals)
    if n < 2:
        raise InsufficientData(f"need >= 2 RR intervals, got {n}")
    diffs = np.abs(np.diff(np.asarray(rr.intervals)))
    return 100.0 * float(np.count_nonzero(diffs > PNN_THRESHOLD_MS)) / (n - 1)


def mean_heart_rate(rr: RrSeries) -> float:
    """Beats per minute: 60000 / mean RR interval in ms."""
    if len(rr.intervals) < 2:
        raise InsufficientData(f"need >= 2 RR intervals, got {len(rr.intervals)}")
    return 60000.0 / float(np.mean(rr.intervals))


def classify_stress(pnn50: float) -> StressLevel:
    """Below 20: high stress; 20 to 50 inclusive: moderate; above 50: low."""
    if not 0.0 <= pnn50 <= 100.0:
        raise ValueError(f"pnn50 out of range: {pnn50}")
    if pnn50 < 20.0:
        return StressLevel.HIGH
    if pnn50 <= 50.0:
        return StressLevel.MODERATE
    return StressLevel.LOW


def detect_r_peaks(samples) -> list[float]:
    """Detect R-peak timestamps (ms) in a contiguous ECG sample run.

    Accepts a sequence of objects with ``timestamp_ms``/``mv`` attributes or a
    pair of arrays. Returned timestamps are strictly increasing and at least
    200 ms apart.
    """
    if isinstance(samples, tuple) and len(samples) == 2:
        ts, mv = (np.asarray(a, dtype=float) for a in samples)
    else:
        ts = np.asarray([s.timestamp_ms for s in samples], dtype=float)
        mv = np.asarray([s.mv for s in samples], dtype=float)
    return _detect_r_peaks_arrays(ts, mv)


def _detect_r_peaks_arrays(ts: np.ndarray, mv: np.ndarray) -> list[float]:
    n = len(ts)
    if n < int(NOMINAL_FS / 2) or (n and ts[-1] - ts[0] < 1000.0):
        raise InsufficientData("need at least 1 s of ECG samples")
    if float(np.ptp(mv)) < FLAT_PTP_MV:
        raise FlatSignal("peak-to-peak amplitude below noise floor")

    dt = float(np.median(np.diff(ts)))
    fs = 1000.0 / dt if dt > 0 else NOMINAL_FS

    b, a = butter(2, [5.0, 15.0], btype="bandpass", fs=fs)
    filtered = filtfilt(b, a, mv)
    squared = filtered * filtered

    win = max(1, int(round(0.150 * fs)))
    integrated = np.convolve(squared, np.ones(win) / win, mode="same")

    rolling_max = maximum_filter1d(integrated, size=max(1, int(round(2.0 * fs))),
                                   mode="nearest")
    # absolute floor keeps noise-only stretches from self-thresholding
    threshold = np.maximum(0.6 * rolling_max, 0.05 * float(integrated.max()))

    refractory_n = max(1, int(round(REFRACTORY_MS / 1000.0 * fs)))
    candidates, _ = find_peaks(integrated, height=threshold, distance=refractory_n)

    # refine each candidate to the sharpest point of the band-passed signal
    half = max(1, int(round(0.075 * fs)))
    refined = []
    for c in candidates:
        lo, hi = max(0, c - half), min(n, c + half + 1)
        refined.append(lo + int(np.argmax(np.abs(filtered[lo:hi]))))

    peaks: list[int] = []
    for idx in sorted(set(refined)):
        if peaks and ts[idx] - ts[peaks[-1]] < REFRACTORY_MS:
            if integrated[idx] > integrated[peaks[-1]]:
                peaks[-1] = idx
        else:
            peaks.append(idx)
    return [float(ts[i]) for i in peaks]


def count_steps(samples, window: tuple[float, float]) -> int:
    """Count steps inside [start, end) from raw accelerometer samples.

    Peak counting on the gravity-removed acceleration magnitude with a
    1.2 m/s^2 threshold and a 250 ms minimum inter-step gap. Empty input
    counts zero; a still signal counts zero.
    """
    if isinstance(samples, tuple) and len(samples) == 2:
        ts = np.asarray(samples[0], dtype=float)
        acc = np.asarray(samples[1], dtype=float)
    else:
        ts = np.asarray([s.timestamp_ms for s in samples], dtype=float)
        acc = np.asarray([s.accel for s in samples], dtype=float)
    if ts.size == 0:
        return 0

    start, end = window
    mask = (ts >= start) & (ts < end)
    ts, acc = ts[mask], acc[mask]
    if len(ts) < 3:
        return 0

    magnitude = np.linalg.norm(acc.reshape(len(ts), -1), axis=1)
    dt = float(np.median(np.diff(ts)))
    fs = 1000.0 / dt if dt > 0 else 50.0

    # gravity sits in the slow-moving mean of the magnitude
    win = max(1, int(round(2.0 * fs)))
    baseline = np.convolve(magnitude, np.ones(win) / win, mode="same")
    detrended = magnitude - baseline

    min_gap_n = max(1, int(round(STEP_MIN_GAP_MS / 1000.0 * fs)))
    peaks, _ = find_peaks(detrended, height=STEP_THRESHOLD_MS2, distance=min_gap_n)
    return int(len(peaks))


def split_on_gaps(ts: np.ndarray, mv: np.ndarray,
                  max_gap_ms: float = GAP_SPLIT_MS) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split an ECG run into contiguous segments; gaps fabricate no beats."""
    if len(ts) == 0:
        return []
    cut = np.nonzero(np.diff(ts) > max_gap_ms)[0] + 1
    return [(t, m) for t, m in zip(np.split(ts, cut), np.split(mv, cut))]


def build_window(ecg: tuple[np.ndarray, np.ndarray],
                 imu: tuple[np.ndarray, np.ndarray],
                 window: tuple[float, float]) -> PhysioWindow:
    """Assemble the per-window physiology summary from raw streams.

    RR intervals never straddle a gap split; pNN50 aggregates successive
    pairs within segments only.
    """
    steps = count_steps(imu, window)

    intervals: list[float] = []
    pair_hits = 0
    pair_total = 0
    dropped = 0
    for seg_ts, seg_mv in split_on_gaps(*ecg):
        try:
            peaks = detect_r_peaks((seg_ts, seg_mv))
        except (InsufficientData, FlatSignal):
            continue
        series = RrSeries.from_peaks(peaks, window)
        dropped += series.dropped
        intervals.extend(series.intervals)
        if len(series.intervals) >= 2:
            diffs = np.abs(np.diff(np.asarray(series.intervals)))
            pair_hits += int(np.count_nonzero(diffs > PNN_THRESHOLD_MS))
            pair_total += len(series.intervals) - 1

    if len(intervals) < 2 or pair_total == 0:
        return PhysioWindow(window, None, None, steps, valid=False, rr_dropped=dropped)

    pnn50 = 100.0 * pair_hits / pair_total
    hr = 60000.0 / float(np.mean(intervals))
    if not 20.0 < hr < 250.0:
        return PhysioWindow(window, None, None, steps, valid=False, rr_dropped=dropped)
    return PhysioWindow(window, pnn50, hr, steps, valid=True, rr_dropped=dropped)
