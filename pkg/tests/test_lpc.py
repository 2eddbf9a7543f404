import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import solve_toeplitz
from scipy.signal import lfilter, welch

from tegg.errors import DegenerateFrameError
from tegg.fixtures import VOWEL_A, VOWEL_I, FormantTrack, synth_glottal_source, synth_pair, synth_speech, tract_magnitude
from tegg.lpc import (
    autocorrelation, ensure_stable, gfm_iaif, inverse_filter, levinson_durbin, lpc_autocorr,
    vocal_tract_order,
)
from tegg.signal_io import resample_down
from tegg.spectral import evaluate_all_pole_response

from conftest import db

FREQS = np.fft.rfftfreq(4096, 1 / 16000)


def ar_signal(coeffs, n, seed):
    noise = np.random.default_rng(seed).normal(size=n)
    return lfilter([1.0], coeffs, noise), noise


def envelope_error(a_v, resonances, fs_true, lo, hi):
    """RMS dB error of |1/A_v| against the true tract, gain removed."""
    est = db(evaluate_all_pole_response(a_v, 4096))
    true = db(tract_magnitude(resonances, FREQS, fs_true))
    band = (FREQS >= lo) & (FREQS <= hi)
    e = (est - true)[band]
    e -= e.mean()
    return float(np.sqrt(np.mean(e ** 2)))


class TestLpcAutocorr:
    def test_white_noise_order1(self):
        x = np.random.default_rng(0).normal(size=10000)
        a, _ = lpc_autocorr(x, 1)
        assert abs(a[1]) < 0.1

    def test_ar1_recovery(self):
        x, _ = ar_signal([1.0, -0.9], 10000, 1)
        a, _ = lpc_autocorr(x, 1)
        assert abs(a[1] + 0.9) < 0.02

    def test_order0(self):
        x = np.random.default_rng(2).normal(size=500)
        a, err = lpc_autocorr(x, 0)
        np.testing.assert_array_equal(a, [1.0])
        assert err == pytest.approx(np.mean(x ** 2), rel=1e-8)

    def test_errors(self):
        with pytest.raises(DegenerateFrameError):
            lpc_autocorr(np.zeros(100), 4)
        with pytest.raises(ValueError):
            lpc_autocorr(np.ones(4), 4)

    def test_matches_toeplitz_solve(self, rng):
        x = rng.normal(size=400) * np.hamming(400)
        r = np.array([np.dot(x[:len(x) - k], x[k:]) for k in range(11)]) / len(x)
        np.testing.assert_allclose(autocorrelation(x, 10), r, rtol=1e-10, atol=1e-14)
        a, _, _ = levinson_durbin(r, 10)
        np.testing.assert_allclose(a[1:], -solve_toeplitz(r[:10], r[1:]), rtol=1e-8, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), alpha=st.floats(1e-3, 1e3))
    def test_scale_invariance(self, seed, alpha):
        x = np.random.default_rng(seed).normal(size=320)
        a1, _ = lpc_autocorr(x, 18)
        a2, _ = lpc_autocorr(alpha * x, 18)
        np.testing.assert_allclose(a2, a1, atol=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_whitening(self, seed):
        rng = np.random.default_rng(seed)
        poles = rng.uniform(0.3, 0.9, 3) * np.exp(1j * rng.uniform(0.2, 2.9, 3))
        a_true = np.real(np.poly(np.r_[poles, poles.conj()]))
        x, _ = ar_signal(a_true, 8000, seed)
        a, _ = lpc_autocorr(x, 6)
        e = inverse_filter(x, a)
        _, p = welch(e, nperseg=256)
        p = p[1:-1]
        assert np.exp(np.mean(np.log(p))) / np.mean(p) >= 0.8

    @given(seed=st.integers(0, 2**31 - 1))
    def test_stable_by_construction(self, seed):
        x = np.random.default_rng(seed).normal(size=320) * np.hamming(320)
        a, _ = lpc_autocorr(x, 18)
        assert np.max(np.abs(np.roots(a))) < 1


class TestInverseFilter:
    def test_identity(self, rng):
        x = rng.normal(size=50)
        np.testing.assert_array_equal(inverse_filter(x, [1.0]), x)

    def test_whitens_ar1(self):
        x, noise = ar_signal([1.0, -0.9], 20000, 3)
        e = inverse_filter(x, [1.0, -0.9])
        np.testing.assert_allclose(e, noise, atol=1e-9)
        e = e - e.mean()
        assert abs(np.dot(e[:-1], e[1:]) / np.dot(e, e)) < 0.05

    def test_exact_inverse(self, rng):
        poles = 0.8 * np.exp(1j * rng.uniform(0, np.pi, 4))
        a = np.real(np.poly(np.r_[poles, poles.conj()]))
        imp = np.zeros(200)
        imp[0] = 1.0
        back = inverse_filter(lfilter([1.0], a, imp), a)
        np.testing.assert_allclose(back, imp, atol=1e-9)


class TestEnsureStable:
    def test_stable_unchanged(self):
        a = np.array([1.0, -0.5, 0.2])
        np.testing.assert_array_equal(ensure_stable(a), a)

    def test_reflects_outside_root(self):
        a = np.array([1.0, -1.25])
        out = ensure_stable(a)
        np.testing.assert_allclose(np.roots(out), [0.8], atol=1e-12)
        w = np.linspace(0, np.pi, 64)
        Ha = np.abs(np.polyval(a[::-1], np.exp(-1j * w)))
        Ho = np.abs(np.polyval(out[::-1], np.exp(-1j * w)))
        ratio = Ha / Ho
        np.testing.assert_allclose(ratio, ratio[0], rtol=1e-9)

    def test_unit_circle_root(self):
        out = ensure_stable(np.array([1.0, -1.0]))
        np.testing.assert_allclose(np.abs(np.roots(out)), [0.998], atol=1e-12)

    @given(seed=st.integers(0, 2**31 - 1))
    def test_always_within_gamma(self, seed):
        rng = np.random.default_rng(seed)
        roots = rng.uniform(0.1, 3.0, 5) * np.exp(1j * rng.uniform(0, np.pi, 5))
        a = np.real(np.poly(np.r_[roots, roots.conj()]))
        assert np.max(np.abs(np.roots(ensure_stable(a)))) <= 0.998 + 1e-9

    def test_preconditions(self):
        with pytest.raises(ValueError):
            ensure_stable([2.0, 1.0])
        with pytest.raises(ValueError):
            ensure_stable([1.0, 0.5], gamma=0.0)


class TestGfmIaif:
    def test_orders(self):
        assert vocal_tract_order(16000) == 18
        assert vocal_tract_order(8000) == 10
        frame = np.random.default_rng(0).normal(size=320)
        est = gfm_iaif(frame, 16000)
        assert len(est.a_v) == 19 and est.vt_order == 18
        assert len(est.a_g) == 4
        np.testing.assert_array_equal(est.a_l, [1.0, -0.99])

    @pytest.mark.parametrize("vowel,f0", [(VOWEL_A, 120), (VOWEL_I, 120), (VOWEL_A, 200)])
    def test_recovers_tract(self, vowel, f0):
        rec = synth_pair(f0, 0.5, 48000, FormantTrack.stationary(vowel, 500), seed=1)
        x = resample_down(rec.speech, 16000).samples
        est = gfm_iaif(x[4000:4320], 16000)
        assert envelope_error(est.a_v, vowel, 48000, 0, 5000) <= 2.0

    def test_flat_tract(self):
        x = synth_speech(synth_glottal_source(120, 0.5, 16000), FormantTrack.stationary((), 500))
        est = gfm_iaif(x.samples[4000:4320], 16000)
        mag = db(evaluate_all_pole_response(est.a_v, 4096))
        band = (FREQS >= 300) & (FREQS <= 5000)
        assert np.ptp(mag[band]) <= 3.0

    @given(seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_stability(self, seed):
        frame = np.random.default_rng(seed).normal(size=320)
        est = gfm_iaif(frame, 16000)
        assert np.max(np.abs(np.roots(est.a_v))) <= 0.998 + 1e-9
        assert np.max(np.abs(np.roots(est.a_g))) <= 0.998 + 1e-9

    def test_errors(self):
        with pytest.raises(DegenerateFrameError):
            gfm_iaif(np.zeros(320), 16000)
        with pytest.raises(ValueError):
            gfm_iaif(np.ones(10), 16000)
