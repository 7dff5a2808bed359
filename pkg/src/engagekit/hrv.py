"""Systolic peak detection, inter-beat intervals, and 24 pulse-variability features.

The feature vector is fixed in order and size: three Poincaré features,
sixteen time-domain features, and five frequency-domain features. Every
formula is written out here so an independent implementation of the same
definitions reproduces the values to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    EmptyInputError,
    InsufficientDataError,
    InsufficientDurationError,
    InsufficientPeaksError,
    TooShortError,
)
from .signal_core import SampledSignal, bandpass, hann_power_spectrum

HRV_FEATURE_NAMES = [
    "SD1", "SD2", "SD1/SD2",
    "MeanNN", "SDNN", "RMSSD", "SDSD", "CVNN", "CVSD", "MedianNN",
    "MadNN", "MCVNN", "IQRNN", "pNN50", "pNN20", "MinNN", "MaxNN",
    "HTI", "TINN",
    "LF", "HF", "LF/HF", "LFn", "HFn",
]

# Detector constants: smoothing window spans, activation offset fraction,
# and the refractory period between accepted peaks.
PEAK_WINDOW_S = 0.111
BEAT_WINDOW_S = 0.667
THRESHOLD_FRACTION = 0.02
REFRACTORY_S = 0.333
DETECT_BAND = (0.5, 3.0)

# Plausible human inter-beat interval range in milliseconds.
PLAUSIBLE_IBI_MS = (300.0, 2000.0)

HISTOGRAM_BIN_MS = 1000.0 / 128.0  # geometric-feature histogram resolution
TINN_BIN_COUNT = 128

LF_BAND = (0.04, 0.15)
HF_BAND = (0.15, 0.40)
TACHOGRAM_FS = 4.0


@dataclass(frozen=True)
class PeakList:
    """Systolic peak times in seconds, strictly increasing."""

    times: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("peak times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class IbiSeries:
    """Ordered inter-beat intervals in ms with their onset times in seconds."""

    intervals: np.ndarray
    onset_times: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "intervals", np.asarray(self.intervals, dtype=float))
        object.__setattr__(self, "onset_times", np.asarray(self.onset_times, dtype=float))
        if self.intervals.shape != self.onset_times.shape:
            raise ValueError("intervals and onset times must align")
        if np.any(self.intervals <= 0):
            raise ValueError("intervals must be positive")
        if len(self.onset_times) > 1 and not np.all(np.diff(self.onset_times) > 0):
            raise ValueError("onset times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def span_s(self) -> float:
        """Time from the first peak to the last peak the series covers."""
        if len(self) == 0:
            return 0.0
        return float(
            self.onset_times[-1] + self.intervals[-1] / 1000.0 - self.onset_times[0]
        )


def _moving_mean(x: np.ndarray, width: int) -> np.ndarray:
    kernel = np.ones(width)
    sums = np.convolve(x, kernel, mode="same")
    counts = np.convolve(np.ones_like(x), kernel, mode="same")
    return sums / counts


def detect_peaks(ppg: SampledSignal) -> PeakList:
    """Locate systolic peaks with a two-moving-average activation detector.

    Band-passed signal (0.5-3 Hz), negatives clipped, squared; a short
    (111 ms) and a long (667 ms) moving mean are compared, with the long
    mean offset by 2% of the squared signal's global mean. Runs where the
    short mean wins and that last at least 111 ms become candidate blocks;
    the band-passed maximum inside each block is the peak. Peaks closer
    than the 333 ms refractory period keep only the larger one.

    The threshold is amplitude-relative, so positive rescaling of the
    input leaves the result unchanged.
    """
    if ppg.duration < 10.0:
        raise TooShortError(
            f"peak detection needs >= 10 s of signal, got {ppg.duration:.2f} s"
        )
    if ppg.fs < 10.0:
        raise TooShortError(f"peak detection needs fs >= 10 Hz, got {ppg.fs} Hz")

    band = bandpass(ppg, *DETECT_BAND).values
    squared = np.clip(band, 0.0, None) ** 2

    w_peak = max(1, int(round(PEAK_WINDOW_S * ppg.fs)))
    w_beat = max(2, int(round(BEAT_WINDOW_S * ppg.fs)))
    peak_mean = _moving_mean(squared, w_peak)
    beat_mean = _moving_mean(squared, w_beat)
    active = peak_mean > beat_mean + THRESHOLD_FRACTION * squared.mean()

    edges = np.flatnonzero(np.diff(np.concatenate(([False], active, [False]))))
    starts, ends = edges[0::2], edges[1::2]

    candidates = []
    for start, end in zip(starts, ends):
        if end - start < w_peak:
            continue
        idx = start + int(np.argmax(band[start:end]))
        candidates.append(idx)

    kept = []
    refractory = REFRACTORY_S * ppg.fs
    for idx in candidates:
        if kept and idx - kept[-1] < refractory:
            if band[idx] > band[kept[-1]]:
                kept[-1] = idx
        else:
            kept.append(idx)

    return PeakList(ppg.t0 + np.asarray(kept, dtype=float) / ppg.fs)


def compute_ibis(peaks: PeakList) -> IbiSeries:
    """Successive peak differences in ms; interval i starts at peak i."""
    if len(peaks) < 2:
        raise InsufficientPeaksError(
            f"need at least 2 peaks for intervals, got {len(peaks)}"
        )
    return IbiSeries(np.diff(peaks.times) * 1000.0, peaks.times[:-1])


def slice_ibis(ibi: IbiSeries, start_s: float, end_s: float) -> IbiSeries:
    """Intervals whose onset lies in [start_s, end_s]."""
    mask = (ibi.onset_times >= start_s) & (ibi.onset_times <= end_s)
    return IbiSeries(ibi.intervals[mask], ibi.onset_times[mask])


def implausible_mask(ibi: IbiSeries) -> np.ndarray:
    """True where an interval falls outside the plausible human range."""
    low, high = PLAUSIBLE_IBI_MS
    return (ibi.intervals < low) | (ibi.intervals > high)


def filter_implausible(ibi: IbiSeries) -> IbiSeries:
    keep = ~implausible_mask(ibi)
    return IbiSeries(ibi.intervals[keep], ibi.onset_times[keep])


def _require_intervals(ibi: IbiSeries, minimum: int) -> np.ndarray:
    if len(ibi) < minimum:
        raise InsufficientDataError(
            f"need at least {minimum} intervals, got {len(ibi)}"
        )
    return ibi.intervals


def _triangular_histogram(nn: np.ndarray) -> tuple:
    """Counts over a 128-bin grid spanning [MinNN, MaxNN].

    The grid scales with the data, so the triangular-fit baseline width
    doubles exactly when every interval doubles.
    """
    lo, hi = nn.min(), nn.max()
    if hi == lo:
        return None, None, None
    width = (hi - lo) / TINN_BIN_COUNT
    idx = np.minimum(((nn - lo) / width).astype(int), TINN_BIN_COUNT - 1)
    counts = np.bincount(idx, minlength=TINN_BIN_COUNT).astype(float)
    centers = lo + (np.arange(TINN_BIN_COUNT) + 0.5) * width
    return counts, centers, width


def _tinn(nn: np.ndarray) -> float:
    """Baseline width of the best least-squares triangular histogram fit.

    The fit error separates into a rising part (left of the modal bin,
    depends only on N) and a falling part (right of it, depends only on M),
    so both ends are optimized independently. Candidates extend one bin
    beyond the occupied range so the triangle may taper to zero just
    outside the data. Zero when a single bin holds all intervals.
    """
    counts, centers, width = _triangular_histogram(nn)
    if counts is None or np.count_nonzero(counts) <= 1:
        return 0.0
    mode = int(np.argmax(counts))
    peak_pos, peak_count = centers[mode], counts[mode]

    left = np.arange(-1, mode)
    best_n, best_err = centers[0] - width, np.inf
    for k in left:
        n_pos = centers[k] if k >= 0 else centers[0] - width
        rising = np.zeros(mode + 1)
        seg = centers[: mode + 1] > n_pos
        rising[seg] = peak_count * (centers[: mode + 1][seg] - n_pos) / (peak_pos - n_pos)
        err = float(((counts[: mode + 1] - rising) ** 2).sum())
        if err < best_err:
            best_err, best_n = err, n_pos

    right = np.arange(mode + 1, TINN_BIN_COUNT + 1)
    best_m, best_err = centers[-1] + width, np.inf
    for k in right:
        m_pos = centers[k] if k < TINN_BIN_COUNT else centers[-1] + width
        falling = np.zeros(TINN_BIN_COUNT - mode - 1)
        tail = centers[mode + 1 :]
        seg = tail < m_pos
        falling[seg] = peak_count * (m_pos - tail[seg]) / (m_pos - peak_pos)
        err = float(((counts[mode + 1 :] - falling) ** 2).sum())
        if err < best_err:
            best_err, best_m = err, m_pos

    return float(best_m - best_n)


def hrv_time(ibi: IbiSeries) -> np.ndarray:
    """The sixteen time-domain features, in canonical order.

    Standard deviations are sample statistics (divisor n-1), quantiles use
    linear interpolation, and pNN50/pNN20 count strictly greater absolute
    successive differences, in percent.
    """
    nn = _require_intervals(ibi, 3)
    diffs = np.diff(nn)

    mean_nn = float(nn.mean())
    sdnn = float(nn.std(ddof=1))
    rmssd = float(np.sqrt(np.mean(diffs**2)))
    sdsd = float(diffs.std(ddof=1))
    median_nn = float(np.median(nn))
    mad_nn = float(1.4826 * np.median(np.abs(nn - median_nn)))
    iqr_nn = float(np.quantile(nn, 0.75) - np.quantile(nn, 0.25))
    pnn50 = float(100.0 * np.mean(np.abs(diffs) > 50.0))
    pnn20 = float(100.0 * np.mean(np.abs(diffs) > 20.0))

    bin_idx = (nn / HISTOGRAM_BIN_MS).astype(int)
    hti = float(len(nn) / np.bincount(bin_idx).max())

    return np.array([
        mean_nn, sdnn, rmssd, sdsd, sdnn / mean_nn, rmssd / mean_nn,
        median_nn, mad_nn, mad_nn / median_nn, iqr_nn, pnn50, pnn20,
        float(nn.min()), float(nn.max()), hti, _tinn(nn),
    ])


def hrv_poincare(ibi: IbiSeries) -> np.ndarray:
    """SD1, SD2, and their ratio (zero when SD2 is zero)."""
    nn = _require_intervals(ibi, 3)
    diffs = np.diff(nn)
    sd1 = float(diffs.std(ddof=1) / np.sqrt(2.0))
    sdnn = float(nn.std(ddof=1))
    sd2 = float(np.sqrt(max(0.0, 2.0 * sdnn**2 - sd1**2)))
    ratio = sd1 / sd2 if sd2 > 0 else 0.0
    return np.array([sd1, sd2, ratio])


def _tachogram(ibi: IbiSeries) -> SampledSignal:
    t = ibi.onset_times
    grid = t[0] + np.arange(int(np.floor((t[-1] - t[0]) * TACHOGRAM_FS)) + 1) / TACHOGRAM_FS
    return SampledSignal(np.interp(grid, t, ibi.intervals), TACHOGRAM_FS, t0=t[0])


def hrv_freq(ibi: IbiSeries, min_duration_s: float = 60.0) -> np.ndarray:
    """LF, HF, LF/HF, LFn, HFn from the interpolated tachogram spectrum.

    Intervals are linearly interpolated onto a 4 Hz grid, mean-removed,
    and Hann-periodogrammed; band powers integrate trapezoidally over
    0.04-0.15 Hz and 0.15-0.40 Hz. The series must cover the requested
    duration from first to last beat; two median intervals of slack are
    allowed so a nominal 60 s observation window whose edge beats sit
    within a beat of its borders still qualifies.
    """
    if len(ibi) < 2:
        raise InsufficientDataError("need at least 2 intervals for spectra")
    slack = 2.0 * float(np.median(ibi.intervals)) / 1000.0
    if ibi.span_s < min_duration_s - slack:
        raise InsufficientDurationError(
            f"series covers {ibi.span_s:.1f} s; frequency features need "
            f"~{min_duration_s:.0f} s"
        )

    tach = _tachogram(ibi)
    power, freqs = hann_power_spectrum(tach.values, tach.fs)
    lf_mask = (freqs >= LF_BAND[0]) & (freqs <= LF_BAND[1])
    hf_mask = (freqs >= HF_BAND[0]) & (freqs <= HF_BAND[1])
    lf = float(np.trapezoid(power[lf_mask], freqs[lf_mask]))
    hf = float(np.trapezoid(power[hf_mask], freqs[hf_mask]))
    total = lf + hf
    if total <= 0:
        raise DegenerateSpectrumError("tachogram has no LF or HF power")
    return np.array([lf, hf, lf / hf if hf > 0 else np.inf, lf / total, hf / total])


def hrv_all(ibi: IbiSeries, min_freq_duration_s: float = 60.0) -> np.ndarray:
    """All 24 features: Poincaré, then time domain, then frequency domain."""
    return np.concatenate([
        hrv_poincare(ibi),
        hrv_time(ibi),
        hrv_freq(ibi, min_freq_duration_s),
    ])


def mean_hr(ibi: IbiSeries) -> float:
    """Average heart rate in bpm implied by the mean interval."""
    if len(ibi) == 0:
        raise EmptyInputError("cannot compute heart rate without intervals")
    return 60000.0 / float(ibi.intervals.mean())
