import logging
import wave

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.io import wavfile
from scipy.signal import sosfilt, sosfreqz

from tegg.errors import ChannelCountError, UnsupportedEncodingError, WavFormatError
from tegg.signal_io import (
    MonoSignal, StereoRecording, decimation_filter, interpolate_impulse_response,
    interpolation_filter, pad_silence, peak_normalize, read_recording, read_wav,
    resample_down, write_audio, write_recording, write_wav,
)
from tegg.spectral import MagnitudeResponse, min_phase_fir

from conftest import db, tone

LSB = {"16": 2.0**-15, "24": 2.0**-23, "float32": 2.0**-23}


def _sine_amplitude(x, freq, rate):
    # least-squares sine fit
    t = np.arange(len(x)) / rate
    basis = np.column_stack([np.sin(2 * np.pi * freq * t), np.cos(2 * np.pi * freq * t)])
    coef, *_ = np.linalg.lstsq(basis, x, rcond=None)
    return float(np.hypot(*coef))


class TestTypes:
    def test_mono_signal_is_read_only(self):
        s = MonoSignal([0.1, 0.2], 16000)
        with pytest.raises(ValueError):
            s.samples[0] = 1.0

    @pytest.mark.parametrize("rate", [0, -1, 16000.5])
    def test_rejects_bad_rate(self, rate):
        with pytest.raises(ValueError):
            MonoSignal([0.0], rate)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            MonoSignal([0.0, np.nan], 16000)

    def test_stereo_requires_sync(self):
        with pytest.raises(ValueError):
            StereoRecording(MonoSignal(np.zeros(10), 16000), MonoSignal(np.zeros(11), 16000))
        with pytest.raises(ValueError):
            StereoRecording(MonoSignal(np.zeros(10), 16000), MonoSignal(np.zeros(10), 48000))


class TestReadWrite:
    def test_stereo_24bit_one_second(self, tmp_path, rng):
        rec = StereoRecording(MonoSignal(rng.uniform(-0.9, 0.9, 48000), 48000),
                              MonoSignal(rng.uniform(-0.9, 0.9, 48000), 48000))
        path = tmp_path / "pair.wav"
        write_recording(rec, path, "24")
        back = read_recording(path)
        assert back.sample_rate == 48000
        assert len(back.speech) == len(back.egg) == 48000
        assert np.max(np.abs(back.speech.samples - rec.speech.samples)) <= LSB["24"]

    def test_mono_file_rejected(self, tmp_path):
        path = tmp_path / "mono.wav"
        write_wav(MonoSignal(np.zeros(100), 16000), path)
        with pytest.raises(ChannelCountError, match="expected 2 channels, found 1"):
            read_recording(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_recording(tmp_path / "nope.wav")

    def test_non_wav_payload(self, tmp_path):
        path = tmp_path / "junk.wav"
        path.write_bytes(b"this is not a riff file at all" * 10)
        with pytest.raises(WavFormatError):
            read_recording(path)

    def test_unsupported_encoding(self, tmp_path):
        path = tmp_path / "u8.wav"
        wavfile.write(path, 16000, np.zeros((100, 2), dtype=np.uint8))
        with pytest.raises(UnsupportedEncodingError):
            read_recording(path)

    def test_channel_map(self, tmp_path, rng):
        a, b = rng.uniform(-0.5, 0.5, (2, 1000))
        path = tmp_path / "p.wav"
        write_recording(StereoRecording(MonoSignal(a, 16000), MonoSignal(b, 16000)), path, "float32")
        swapped = read_recording(path, speech_channel="right")
        np.testing.assert_allclose(swapped.speech.samples, b, atol=1e-7)
        np.testing.assert_allclose(swapped.egg.samples, a, atol=1e-7)
        with pytest.raises(ValueError):
            read_recording(path, speech_channel="middle")

    def test_header_mono_24bit(self, tmp_path):
        path = tmp_path / "h.wav"
        write_wav(MonoSignal(np.zeros(48000), 48000), path, "24")
        with wave.open(str(path)) as w:
            assert w.getframerate() == 48000
            assert w.getnchannels() == 1
            assert w.getsampwidth() == 3
            assert w.getnframes() == 48000

    def test_clipping_warns(self, tmp_path, caplog):
        path = tmp_path / "c.wav"
        with caplog.at_level(logging.WARNING, logger="tegg.signal_io"):
            write_wav(MonoSignal([0.0, 1.5, -2.0], 16000), path, "float32")
        assert "clipping" in caplog.text
        x, _ = read_wav(path)
        np.testing.assert_array_equal(x, [0.0, 1.0, -1.0])

    def test_empty_signal_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_wav(MonoSignal([], 16000), tmp_path / "e.wav")

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(OSError):
            write_wav(MonoSignal([0.1], 16000), tmp_path / "missing" / "x.wav")

    def test_bad_bit_depth(self, tmp_path):
        with pytest.raises(ValueError):
            write_audio(tmp_path / "x.wav", np.zeros(3), 16000, "8")

    def test_16bit_round_trip_below_half_step(self, tmp_path, rng):
        x = rng.uniform(-1, 1, 5000)
        path = tmp_path / "r.wav"
        write_wav(MonoSignal(x, 16000), path, "16")
        back, rate = read_wav(path)
        assert rate == 16000
        assert np.max(np.abs(back - x)) < 2.0**-15

    @settings(max_examples=25, deadline=None)
    @given(depth=st.sampled_from(["16", "24", "float32"]), seed=st.integers(0, 2**31 - 1),
           n=st.integers(1, 3000))
    def test_round_trip_within_one_lsb(self, tmp_path_factory, depth, seed, n):
        x = np.random.default_rng(seed).uniform(-1, 1, n)
        path = tmp_path_factory.mktemp("rt") / "x.wav"
        write_wav(MonoSignal(x, 22050), path, depth)
        back, _ = read_wav(path)
        assert np.max(np.abs(back - x)) <= LSB[depth]

    def test_no_temp_files_left(self, tmp_path):
        write_wav(MonoSignal([0.1, 0.2], 16000), tmp_path / "a.wav")
        assert [p.name for p in tmp_path.iterdir()] == ["a.wav"]


class TestResample:
    def test_length(self):
        for n in (48000, 48001, 48002, 10):
            out = resample_down(MonoSignal(np.zeros(n), 48000), 16000)
            assert len(out) == -(-n // 3)
            assert out.sample_rate == 16000

    def test_dc_preserved(self):
        out = resample_down(MonoSignal(np.full(48000, 0.5), 48000), 16000)
        np.testing.assert_allclose(out.samples[200:-200], 0.5, atol=1e-3)

    def test_1khz_amplitude(self):
        out = resample_down(tone(1000, 1.0, 48000, 0.5), 16000)
        amp = _sine_amplitude(out.samples[500:-500], 1000, 16000)
        assert abs(db(amp / 0.5)) < 0.1

    def test_7900hz_attenuated(self):
        out = resample_down(tone(7900, 1.0, 48000), 16000)
        amp = _sine_amplitude(out.samples[500:-500], 7900, 16000)
        assert db(amp) <= -40

    def test_alias_band_rejected(self):
        # tones above the target Nyquist must not fold back
        for f in (8500, 10000, 15000):
            out = resample_down(tone(f, 1.0, 48000), 16000).samples[500:-500]
            assert db(np.sqrt(2) * np.std(out)) <= -40

    def test_passband_flat(self):
        sos = decimation_filter(48000, 16000)
        f, h = sosfreqz(sos, worN=np.linspace(10, 0.45 * 8000, 200), fs=48000)
        # forward-backward doubles the dB response
        assert np.max(np.abs(2 * db(h))) < 0.1
        _, h0 = sosfreqz(sos, worN=[0.0], fs=48000)
        assert abs(abs(h0[0]) - 1) < 1e-12

    @pytest.mark.parametrize("target", [48000, 50000, 14000])
    def test_bad_targets(self, target):
        with pytest.raises(ValueError):
            resample_down(MonoSignal(np.zeros(100), 48000), target)


class TestInterpolate:
    def test_impulse_gives_filter_response(self):
        h = MonoSignal(np.r_[1.0, np.zeros(255)], 16000)
        out = interpolate_impulse_response(h, 3)
        assert out.sample_rate == 48000 and len(out) == 768
        probe = np.zeros(768)
        probe[0] = 1.0
        expected = sosfilt(interpolation_filter(3, 16000), probe)
        np.testing.assert_allclose(out.samples, 3 * expected, atol=1e-12)
        assert abs(np.sum(expected) - 1.0) < 1e-2

    def test_dc_level(self):
        out = interpolate_impulse_response(MonoSignal(np.ones(300), 16000), 3)
        np.testing.assert_allclose(out.samples[300:-30], 1.0, atol=1e-2)

    def test_min_phase_fir_magnitude_kept(self):
        freqs = np.fft.rfftfreq(4096, 1 / 16000)
        target = 1 / np.abs(1 - 0.5 * np.exp(-2j * np.pi * freqs / 16000))
        fir = min_phase_fir(MagnitudeResponse(target, 4096, 16000), 2048)
        out = interpolate_impulse_response(fir, 3)
        H16 = np.abs(np.fft.rfft(fir.samples, 4096 * 4))
        H48 = np.abs(np.fft.rfft(out.samples, 4096 * 12))
        f16 = np.fft.rfftfreq(4096 * 4, 1 / 16000)
        band = f16 < 7600
        # x3 level compensation scales the discrete-time gain by the factor
        assert np.max(np.abs(db(H48[:len(f16)][band] / (3 * H16[band])))) < 1.0

    def test_filter_is_fourth_order(self):
        assert interpolation_filter(3, 16000).shape == (2, 6)

    @pytest.mark.parametrize("factor", [1, 0, 2.5])
    def test_bad_factor(self, factor):
        with pytest.raises(ValueError):
            interpolate_impulse_response(MonoSignal([1.0], 16000), factor)

    def test_empty(self):
        with pytest.raises(ValueError):
            interpolate_impulse_response(MonoSignal([], 16000), 3)


class TestLevels:
    def test_pad_arithmetic(self):
        assert len(pad_silence(MonoSignal(np.ones(48000), 48000))) == 52800
        assert len(pad_silence(MonoSignal(np.ones(100), 16000), 20, 0)) == 420
        x = MonoSignal(np.arange(5.0), 16000)
        np.testing.assert_array_equal(pad_silence(x, 0, 0).samples, x.samples)

    def test_pad_negative(self):
        with pytest.raises(ValueError):
            pad_silence(MonoSignal([1.0], 16000), -1, 0)

    @given(n=st.integers(1, 500), a=st.floats(0, 100), b=st.floats(0, 100))
    def test_pad_length_property(self, n, a, b):
        out = pad_silence(MonoSignal(np.ones(n), 8000), a, b)
        assert len(out) == n + round(a * 8) + round(b * 8)

    def test_normalize_arithmetic(self):
        out = peak_normalize(MonoSignal([0.25, -0.1], 16000))
        assert abs(np.max(np.abs(out.samples)) - 0.891250938) < 1e-6

    def test_normalize_zero(self):
        with pytest.raises(ValueError):
            peak_normalize(MonoSignal(np.zeros(10), 16000))

    @given(seed=st.integers(0, 2**31 - 1), target=st.floats(-60, 0))
    def test_normalize_property(self, seed, target):
        x = MonoSignal(np.random.default_rng(seed).normal(size=64), 16000)
        once = peak_normalize(x, target)
        assert abs(np.max(np.abs(once.samples)) - 10 ** (target / 20)) < 1e-6
        twice = peak_normalize(once, target)
        np.testing.assert_allclose(twice.samples, once.samples, atol=1e-9)
