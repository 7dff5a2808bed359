"""Sampled-signal representation, band filtering, and spectral estimation.

All physiological modules share these primitives. The filter is a zero-phase
DFT mask and the PSD a single Hann-windowed periodogram, so results are
deterministic and reproducible bit-for-bit across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import (
    EmptyInputError,
    FlatSignalError,
    InvalidBandError,
    TooShortError,
)

# Heart-rate plausibility band used throughout (40-180 bpm).
HR_BAND = (0.66, 3.0)


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled real-valued time series.

    Attributes:
        values: sample values.
        fs: sampling rate in Hz, strictly positive.
        t0: time of the first sample in seconds.
    """

    values: np.ndarray
    fs: float
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1:
            raise ValueError("signal values must be one-dimensional")
        if not self.fs > 0:
            raise ValueError("sampling rate must be positive")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def duration(self) -> float:
        """Covered time in seconds (sample count over sampling rate)."""
        return len(self.values) / self.fs

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.values)) / self.fs


@dataclass(frozen=True)
class PsdVector:
    """Power spectral density restricted to a frequency band.

    Attributes:
        power: non-negative power per bin.
        freqs: bin frequencies in Hz, strictly increasing.
        band: (low, high) band limits in Hz.
    """

    power: np.ndarray
    freqs: np.ndarray
    band: tuple = field(default=HR_BAND)

    def __post_init__(self):
        object.__setattr__(self, "power", np.asarray(self.power, dtype=float))
        object.__setattr__(self, "freqs", np.asarray(self.freqs, dtype=float))
        if self.power.shape != self.freqs.shape:
            raise ValueError("power and freqs must have equal length")
        if len(self.freqs) > 1 and not np.all(np.diff(self.freqs) > 0):
            raise ValueError("freqs must be strictly increasing")
        if np.any(self.power < 0):
            raise ValueError("power must be non-negative")

    def __len__(self) -> int:
        return len(self.power)


def _check_band(low: float, high: float, fs: float) -> None:
    if not (0 < low < high < fs / 2):
        raise InvalidBandError(
            f"band [{low}, {high}] Hz must satisfy 0 < low < high < fs/2 = {fs / 2}"
        )


def bandpass(signal: SampledSignal, low: float, high: float) -> SampledSignal:
    """Zero-phase band-pass via DFT masking.

    The mean-removed signal is transformed, bins outside [low, high] are
    zeroed, and a raised-cosine taper of width 0.1*low smooths each band edge
    (taper lies inside the band, so the stop band is exactly zero).
    """
    _check_band(low, high, signal.fs)
    n = len(signal)
    if n < 8:
        raise TooShortError(f"need at least 8 samples to filter, got {n}")

    x = signal.values - signal.values.mean()
    spectrum = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, d=1.0 / signal.fs)

    width = 0.1 * low
    mask = np.zeros_like(freqs)
    flat = (freqs >= low + width) & (freqs <= high - width)
    mask[flat] = 1.0
    rising = (freqs >= low) & (freqs < low + width)
    mask[rising] = 0.5 * (1 - np.cos(np.pi * (freqs[rising] - low) / width))
    falling = (freqs > high - width) & (freqs <= high)
    mask[falling] = 0.5 * (1 - np.cos(np.pi * (high - freqs[falling]) / width))

    filtered = np.fft.irfft(spectrum * mask, n=n)
    return SampledSignal(filtered, signal.fs, signal.t0)


def fft_length(n: int) -> int:
    """Smallest power of two that is at least four times ``n``."""
    return 1 << int(np.ceil(np.log2(4 * n)))


def hann_power_spectrum(values: np.ndarray, fs: float) -> tuple:
    """Squared-magnitude Hann periodogram over the full rFFT grid.

    Mean removal, Hann window, zero padding to ``fft_length``; no
    precondition checks. Returns (power, freqs).
    """
    x = np.asarray(values, dtype=float)
    windowed = (x - x.mean()) * np.hanning(len(x))
    m = fft_length(len(x))
    spectrum = np.fft.rfft(windowed, n=m)
    power = np.abs(spectrum) ** 2
    freqs = np.fft.rfftfreq(m, d=1.0 / fs)
    return power, freqs


def periodogram_psd(
    signal: SampledSignal,
    band: tuple = HR_BAND,
    normalize: bool = False,
) -> PsdVector:
    """Hann-windowed periodogram restricted to ``band``.

    Requires the signal to span at least four cycles of the band's lowest
    frequency. With ``normalize`` the in-band power is scaled to unit sum;
    a flat signal (zero in-band power) then raises ``FlatSignalError``.
    """
    low, high = band
    _check_band(low, high, signal.fs)
    if len(signal) == 0:
        raise EmptyInputError("cannot compute the PSD of an empty signal")
    if signal.duration < 4.0 / low:
        raise TooShortError(
            f"signal spans {signal.duration:.3f} s but band low {low} Hz "
            f"needs at least {4.0 / low:.3f} s (four cycles)"
        )

    power, freqs = hann_power_spectrum(signal.values, signal.fs)
    in_band = (freqs >= low) & (freqs <= high)
    power, freqs = power[in_band], freqs[in_band]

    if normalize:
        total = power.sum()
        if total <= 0:
            raise FlatSignalError("no in-band power; cannot normalize a flat signal")
        power = power / total
    return PsdVector(power, freqs, (low, high))


def dominant_frequency(psd: PsdVector) -> float:
    """Frequency of the maximum-power bin; ties resolve to the lowest bin."""
    if len(psd) == 0:
        raise EmptyInputError("empty PSD has no dominant frequency")
    return float(psd.freqs[int(np.argmax(psd.power))])


def hr_from_psd(psd: PsdVector) -> float:
    """Heart rate in bpm implied by the dominant spectral frequency."""
    return 60.0 * dominant_frequency(psd)


def read_signal_csv(path) -> SampledSignal:
    """Load a two-column ``time_s,value`` CSV.

    The sampling rate is inferred from the median timestamp delta; files
    whose deltas deviate from the median by more than 1% are rejected.
    """
    frame = pd.read_csv(path)
    for column in ("time_s", "value"):
        if column not in frame.columns:
            raise EmptyInputError(f"signal file {path} lacks a '{column}' column")
    times = frame["time_s"].to_numpy(dtype=float)
    values = frame["value"].to_numpy(dtype=float)
    if len(times) < 2:
        raise TooShortError(f"signal file {path} holds fewer than 2 samples")
    deltas = np.diff(times)
    median_dt = float(np.median(deltas))
    if median_dt <= 0 or np.any(np.abs(deltas - median_dt) > 0.01 * median_dt):
        raise InvalidBandError(
            f"signal file {path} is not uniformly sampled (deltas vary by > 1%)"
        )
    return SampledSignal(values, fs=1.0 / median_dt, t0=float(times[0]))


def write_signal_csv(signal: SampledSignal, path) -> None:
    """Write the companion format of :func:`read_signal_csv`."""
    frame = pd.DataFrame({"time_s": signal.times, "value": signal.values})
    frame.to_csv(path, index=False, float_format="%.6f")
