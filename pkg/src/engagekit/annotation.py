"""Turning continuous engagement tracks into labeled observation windows.

Recordings are cut into five-second intervals; intervals whose engagement
fluctuates more than the dataset-wide median standard deviation are
discarded, the rest are labeled Low/Medium/High from their mean value, and
each survivor's midpoint anchors the feature-extraction windows.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
import pandas as pd

from .errors import EmptyInputError, InvalidWindowError, TooShortError

INTERVAL_S = 5.0
BF_WINDOW_S = 2.0
HRV_WINDOW_SIZES = (60, 90, 120, 150, 180, 210, 240)

ENGAGEMENT_RANGE = (-10.0, 10.0)
MEDIUM_BOUNDARY = 0.0   # mean >= 0 is at least Medium
HIGH_BOUNDARY = 5.0     # mean >= 5 is High


class EngagementLabel(IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2


LABEL_NAMES = ("Low", "Medium", "High")


@dataclass(frozen=True)
class EngagementTrack:
    """Continuous engagement annotation, nominally two values per second."""

    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "timestamps", np.asarray(self.timestamps, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.timestamps.shape != self.values.shape:
            raise ValueError("timestamps and values must align")
        if len(self.timestamps) > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise ValueError("timestamps must be strictly increasing")
        lo, hi = ENGAGEMENT_RANGE
        if len(self.values) and (self.values.min() < lo or self.values.max() > hi):
            raise ValueError(f"engagement values must lie in [{lo}, {hi}]")

    @property
    def duration(self) -> float:
        """Covered time: timestamp span plus one median sample period."""
        if len(self.timestamps) < 2:
            return 0.0
        dt = float(np.median(np.diff(self.timestamps)))
        return float(self.timestamps[-1] - self.timestamps[0] + dt)

    @property
    def t0(self) -> float:
        return float(self.timestamps[0])

    @property
    def t_end(self) -> float:
        return self.t0 + self.duration


@dataclass(frozen=True)
class IntervalStats:
    start_s: float
    end_s: float
    mean: float
    std: float

    @property
    def center_s(self) -> float:
        return 0.5 * (self.start_s + self.end_s)


@dataclass(frozen=True)
class LabeledInterval:
    start_s: float
    end_s: float
    mean: float
    std: float
    label: EngagementLabel

    @property
    def center_s(self) -> float:
        return 0.5 * (self.start_s + self.end_s)


@dataclass(frozen=True)
class ObservationSample:
    """One surviving five-second interval with its feature windows."""

    recording_id: str
    participant_id: str
    interval: tuple
    interval_mean: float
    interval_std: float
    label: EngagementLabel
    center_s: float
    hrv_span: tuple
    bf_span: tuple


@dataclass(frozen=True)
class DroppedSample:
    recording_id: str
    participant_id: str
    interval: LabeledInterval
    reason: str


def interval_stats(track: EngagementTrack) -> list:
    """Mean and population std per consecutive five-second interval.

    Intervals run from the first timestamp; a trailing span shorter than
    five seconds is dropped. Samples belong to the interval whose
    [start, end) range holds their timestamp.
    """
    if track.duration < INTERVAL_S:
        raise TooShortError(
            f"track covers {track.duration:.2f} s; need at least {INTERVAL_S} s"
        )
    n_intervals = int(np.floor(track.duration / INTERVAL_S))
    out = []
    for k in range(n_intervals):
        start = track.t0 + k * INTERVAL_S
        end = start + INTERVAL_S
        inside = (track.timestamps >= start) & (track.timestamps < end)
        chunk = track.values[inside]
        if len(chunk) == 0:
            continue
        out.append(
            IntervalStats(start, end, float(chunk.mean()), float(chunk.std()))
        )
    return out


def compute_median_threshold(stds: list) -> float:
    """Median of interval standard deviations pooled over all recordings."""
    if len(stds) == 0:
        raise EmptyInputError("no interval standard deviations to pool")
    return float(np.median(np.asarray(stds, dtype=float)))


def label_for_mean(mean: float) -> EngagementLabel:
    if mean < MEDIUM_BOUNDARY:
        return EngagementLabel.LOW
    if mean < HIGH_BOUNDARY:
        return EngagementLabel.MEDIUM
    return EngagementLabel.HIGH


def filter_and_label(intervals: list, threshold: float) -> list:
    """Keep stable intervals (std <= threshold) and label them by mean."""
    kept = []
    for iv in intervals:
        if iv.std <= threshold:
            kept.append(
                LabeledInterval(iv.start_s, iv.end_s, iv.mean, iv.std,
                                label_for_mean(iv.mean))
            )
    return kept


def build_observation_samples(
    labeled: list,
    hrv_window_s: float,
    recording_bounds: tuple,
    signal_bounds: tuple,
    recording_id: str = "",
    participant_id: str = "",
) -> tuple:
    """Center feature windows on each interval midpoint and bound-check them.

    Returns (samples, dropped); windows falling outside either the
    recording or the available signal are dropped, never truncated.
    """
    if hrv_window_s not in HRV_WINDOW_SIZES:
        raise InvalidWindowError(
            f"window of {hrv_window_s} s not in {HRV_WINDOW_SIZES}"
        )
    lo = max(recording_bounds[0], signal_bounds[0])
    hi = min(recording_bounds[1], signal_bounds[1])

    samples, dropped = [], []
    half = hrv_window_s / 2.0
    for iv in labeled:
        center = iv.center_s
        hrv_span = (center - half, center + half)
        bf_span = (center - BF_WINDOW_S / 2.0, center + BF_WINDOW_S / 2.0)
        if hrv_span[0] < lo or hrv_span[1] > hi:
            reason = f"hrv window [{hrv_span[0]:.1f}, {hrv_span[1]:.1f}] outside bounds"
            dropped.append(DroppedSample(recording_id, participant_id, iv, reason))
            continue
        if bf_span[0] < lo or bf_span[1] > hi:
            reason = f"bf window [{bf_span[0]:.1f}, {bf_span[1]:.1f}] outside bounds"
            dropped.append(DroppedSample(recording_id, participant_id, iv, reason))
            continue
        samples.append(
            ObservationSample(recording_id, participant_id,
                              (iv.start_s, iv.end_s), iv.mean, iv.std,
                              iv.label, center, hrv_span, bf_span)
        )
    return samples, dropped


def read_engagement_csv(path) -> EngagementTrack:
    frame = pd.read_csv(path)
    for column in ("time_s", "value"):
        if column not in frame.columns:
            raise EmptyInputError(f"engagement file {path} lacks a '{column}' column")
    return EngagementTrack(
        frame["time_s"].to_numpy(dtype=float), frame["value"].to_numpy(dtype=float)
    )


def write_engagement_csv(track: EngagementTrack, path) -> None:
    frame = pd.DataFrame({"time_s": track.timestamps, "value": track.values})
    frame.to_csv(path, index=False, float_format="%.4f")


def write_samples_report(samples: list, dropped: list, path) -> None:
    """One row per observation sample, kept or dropped, with the reason."""
    rows = []
    for s in samples:
        rows.append({
            "recording_id": s.recording_id,
            "participant_id": s.participant_id,
            "start_s": s.interval[0], "end_s": s.interval[1],
            "center_s": s.center_s,
            "mean": s.interval_mean, "std": s.interval_std,
            "label": LABEL_NAMES[s.label],
            "hrv_start_s": s.hrv_span[0], "hrv_end_s": s.hrv_span[1],
            "bf_start_s": s.bf_span[0], "bf_end_s": s.bf_span[1],
            "status": "kept", "drop_reason": "",
        })
    for d in dropped:
        rows.append({
            "recording_id": d.recording_id,
            "participant_id": d.participant_id,
            "start_s": d.interval[0], "end_s": d.interval[1],
            "center_s": 0.5 * (d.interval[0] + d.interval[1]),
            "mean": np.nan, "std": np.nan,
            "label": LABEL_NAMES[d.label],
            "hrv_start_s": np.nan, "hrv_end_s": np.nan,
            "bf_start_s": np.nan, "bf_end_s": np.nan,
            "status": "dropped", "drop_reason": d.reason,
        })
    pd.DataFrame(rows).to_csv(path, index=False, float_format="%.4f")
