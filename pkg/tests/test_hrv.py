import numpy as np
import pytest

import hrv_oracle
from engagekit import hrv
from engagekit.errors import (
    DegenerateSpectrumError,
    InsufficientDataError,
    InsufficientDurationError,
    InsufficientPeaksError,
    TooShortError,
)
from engagekit.signal_core import SampledSignal


def pulse_train(rate_hz=1.0, duration=60.0, fs=100.0, snr_db=None, seed=0):
    """Double-Gaussian pulse waveform with known beat times."""
    t = np.arange(int(duration * fs)) / fs
    beats = np.arange(0.5, duration - 0.4, 1.0 / rate_hz)
    signal = np.zeros_like(t)
    for b in beats:
        signal += np.exp(-((t - b) ** 2) / (2 * 0.04**2))
        signal += 0.4 * np.exp(-((t - b - 0.25) ** 2) / (2 * 0.04**2))
    if snr_db is not None:
        rng = np.random.default_rng(seed)
        noise_power = np.mean(signal**2) / 10 ** (snr_db / 10)
        signal = signal + rng.normal(scale=np.sqrt(noise_power), size=len(t))
    return SampledSignal(signal, fs), beats


def match_fraction(true_times, detected, tol=0.05):
    if len(detected) == 0:
        return 0.0
    hits = sum(np.min(np.abs(detected - b)) <= tol for b in true_times)
    return hits / len(true_times)


def series(intervals, onsets=None):
    intervals = np.asarray(intervals, dtype=float)
    if onsets is None:
        onsets = np.concatenate(([0.0], np.cumsum(intervals[:-1]) / 1000.0))
    return hrv.IbiSeries(intervals, onsets)


def modulated_series(mod_hz, amp_ms=50.0, base_ms=800.0, duration_s=240.0):
    times, intervals = [], []
    t = 0.0
    while t < duration_s:
        nn = base_ms + amp_ms * np.sin(2 * np.pi * mod_hz * t)
        times.append(t)
        intervals.append(nn)
        t += nn / 1000.0
    return series(np.array(intervals), np.array(times))


class TestDetectPeaks:
    def test_flat_signal_yields_no_peaks(self):
        flat = SampledSignal(np.full(1800, 3.0), 30.0)
        assert len(hrv.detect_peaks(flat)) == 0

    def test_noiseless_train_recovers_every_beat(self):
        sig, beats = pulse_train()
        peaks = hrv.detect_peaks(sig)
        assert abs(len(peaks) - len(beats)) <= 1
        assert match_fraction(beats, peaks.times) == 1.0

    def test_noisy_train_recovers_most_beats(self):
        total = 0.0
        for seed in range(20):
            sig, beats = pulse_train(snr_db=10.0, seed=seed)
            peaks = hrv.detect_peaks(sig)
            total += match_fraction(beats, peaks.times)
        assert total / 20 >= 0.95

    def test_amplitude_scaling_invariance(self):
        sig, _ = pulse_train(snr_db=15.0, seed=3)
        scaled = SampledSignal(sig.values * 37.2, sig.fs, sig.t0)
        np.testing.assert_allclose(
            hrv.detect_peaks(sig).times, hrv.detect_peaks(scaled).times
        )

    def test_short_signal_rejected(self):
        with pytest.raises(TooShortError):
            hrv.detect_peaks(SampledSignal(np.zeros(90), 30.0))

    def test_refractory_period_enforced(self):
        sig, _ = pulse_train(snr_db=10.0, seed=1)
        peaks = hrv.detect_peaks(sig)
        assert np.all(np.diff(peaks.times) >= hrv.REFRACTORY_S - 1e-9)


class TestComputeIbis:
    def test_unit_spacing(self):
        ibi = hrv.compute_ibis(hrv.PeakList([0.0, 1.0, 2.0]))
        np.testing.assert_allclose(ibi.intervals, [1000.0, 1000.0])
        np.testing.assert_allclose(ibi.onset_times, [0.0, 1.0])

    def test_irregular_spacing(self):
        ibi = hrv.compute_ibis(hrv.PeakList([0.0, 0.8, 1.7]))
        np.testing.assert_allclose(ibi.intervals, [800.0, 900.0])

    def test_single_peak_rejected(self):
        with pytest.raises(InsufficientPeaksError):
            hrv.compute_ibis(hrv.PeakList([1.0]))


class TestTimeDomain:
    def test_constant_intervals(self):
        feats = hrv.hrv_time(series([800.0] * 10))
        named = dict(zip(hrv.HRV_FEATURE_NAMES[3:19], feats))
        assert named["SDNN"] == 0.0
        assert named["RMSSD"] == 0.0
        assert named["pNN50"] == 0.0
        assert named["MinNN"] == 800.0 and named["MaxNN"] == 800.0
        assert named["TINN"] == 0.0

    def test_hand_worked_rmssd(self):
        feats = hrv.hrv_time(series([800.0, 810.0, 790.0]))
        named = dict(zip(hrv.HRV_FEATURE_NAMES[3:19], feats))
        assert named["MeanNN"] == pytest.approx(800.0)
        assert named["RMSSD"] == pytest.approx(15.8114, abs=1e-3)

    def test_strict_pnn_comparison(self):
        feats = hrv.hrv_time(series([800.0, 860.0, 810.0]))
        named = dict(zip(hrv.HRV_FEATURE_NAMES[3:19], feats))
        assert named["pNN50"] == 50.0  # |-50| does not count
        assert named["pNN20"] == 100.0

    def test_too_few_intervals(self):
        with pytest.raises(InsufficientDataError):
            hrv.hrv_time(series([800.0, 810.0]))


class TestPoincare:
    def test_constant_intervals_degenerate_ratio(self):
        np.testing.assert_array_equal(
            hrv.hrv_poincare(series([700.0] * 8)), [0.0, 0.0, 0.0]
        )

    def test_hand_worked_sd1(self):
        sd1, _, _ = hrv.hrv_poincare(series([800.0, 810.0, 790.0]))
        assert sd1 == pytest.approx(15.0, abs=1e-3)

    def test_sd1_equals_sdsd_over_sqrt2_exactly(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            nn = rng.uniform(600, 1100, size=rng.integers(3, 60))
            ibi = series(nn)
            sd1 = hrv.hrv_poincare(ibi)[0]
            sdsd = hrv.hrv_time(ibi)[3]
            assert sd1 == sdsd / np.sqrt(2.0)


class TestFrequencyDomain:
    def test_hf_modulation_dominates(self):
        feats = hrv.hrv_freq(modulated_series(0.25))
        assert feats[4] > 0.9  # HFn

    def test_lf_modulation_dominates(self):
        feats = hrv.hrv_freq(modulated_series(0.10))
        assert feats[3] > 0.9  # LFn

    def test_normalized_powers_sum_to_one(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            intervals, onsets = hrv_oracle.random_ibi_series(rng)
            feats = hrv.hrv_freq(series(intervals, onsets))
            assert feats[3] + feats[4] == pytest.approx(1.0, abs=1e-9)

    def test_short_series_rejected(self):
        with pytest.raises(InsufficientDurationError):
            hrv.hrv_freq(series([800.0] * 50))  # spans ~40 s

    def test_constant_series_has_degenerate_spectrum(self):
        with pytest.raises(DegenerateSpectrumError):
            hrv.hrv_freq(series([800.0] * 100))

    def test_window_sized_series_accepted(self):
        # A nominal 60 s window's beats span slightly less than 60 s;
        # the slack of two median intervals must admit them.
        intervals = np.full(73, 810.0)  # spans 59.13 s
        feats_ok = hrv.hrv_freq(modulated_series(0.25, duration_s=59.0))
        assert len(feats_ok) == 5


class TestAllFeatures:
    def test_vector_shape_and_composition(self):
        ibi = modulated_series(0.25)
        vec = hrv.hrv_all(ibi)
        assert vec.shape == (24,)
        assert np.all(np.isfinite(vec))
        np.testing.assert_array_equal(vec[:3], hrv.hrv_poincare(ibi))
        np.testing.assert_array_equal(vec[3:19], hrv.hrv_time(ibi))
        np.testing.assert_array_equal(vec[19:], hrv.hrv_freq(ibi))

    def test_mean_hr(self):
        assert hrv.mean_hr(series([800.0] * 10)) == pytest.approx(75.0)

    def test_names_cover_vector(self):
        assert len(hrv.HRV_FEATURE_NAMES) == 24


class TestOracleEquivalence:
    def test_features_match_direct_definitions(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            intervals, onsets = hrv_oracle.random_ibi_series(rng)
            ibi = series(intervals, onsets)
            mine = hrv.hrv_all(ibi)
            ref = np.asarray(hrv_oracle.oracle_all(intervals, onsets))
            np.testing.assert_allclose(mine, ref, rtol=1e-9, atol=1e-9)


class TestScalingInvariance:
    DOUBLING = ["MeanNN", "SDNN", "RMSSD", "SDSD", "MadNN", "IQRNN",
                "MinNN", "MaxNN", "TINN"]
    UNCHANGED = ["CVNN", "CVSD", "MCVNN"]

    def test_doubling_table_holds_exactly(self):
        rng = np.random.default_rng(6)
        time_names = hrv.HRV_FEATURE_NAMES[3:19]
        for _ in range(10):
            nn = rng.uniform(600, 1100, size=50)
            base = dict(zip(time_names, hrv.hrv_time(series(nn))))
            doubled = dict(zip(time_names, hrv.hrv_time(series(nn * 2.0))))
            for name in self.DOUBLING:
                assert doubled[name] == 2.0 * base[name], name
            for name in self.UNCHANGED:
                assert doubled[name] == base[name], name


class TestIbiUtilities:
    def test_slice_by_onset(self):
        ibi = series([800.0] * 20)
        sliced = hrv.slice_ibis(ibi, 3.0, 9.0)
        assert np.all(sliced.onset_times >= 3.0)
        assert np.all(sliced.onset_times <= 9.0)
        assert len(sliced) > 0

    def test_implausible_flagging_keeps_everything(self):
        ibi = series([250.0, 800.0, 2500.0, 820.0])
        mask = hrv.implausible_mask(ibi)
        np.testing.assert_array_equal(mask, [True, False, True, False])
        assert len(ibi) == 4  # flagged, not removed

    def test_filter_implausible(self):
        ibi = series([250.0, 800.0, 2500.0, 820.0])
        kept = hrv.filter_implausible(ibi)
        np.testing.assert_array_equal(kept.intervals, [800.0, 820.0])
