"""WAV I/O, channel splitting, rate conversion and level utilities.

Internally every waveform is float64 at full scale +/-1.0. Files are the only
quantization boundary.
"""

import logging
import os
import tempfile
import wave
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps
from scipy.io import wavfile

from .errors import ChannelCountError, UnsupportedEncodingError, WavFormatError

log = logging.getLogger(__name__)

BIT_DEPTHS = ("16", "24", "float32")

# Decimation anti-alias: 8th-order elliptic, zero phase (sosfiltfilt), passband
# edge at this fraction of the target Nyquist.
DECIM_ORDER = 8
DECIM_EDGE = 0.875
DECIM_RIPPLE_DB = 0.01
DECIM_STOP_DB = 60.0

# Impulse-response interpolation: 4th-order elliptic low-pass, edge at the
# original Nyquist, unit DC gain; zero insertion is compensated by x factor.
INTERP_ORDER = 4
INTERP_RIPPLE_DB = 0.5
INTERP_STOP_DB = 50.0


@dataclass(frozen=True)
class MonoSignal:
    """A sampled waveform. ``samples`` is stored read-only as float64."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples) -> "MonoSignal":
        return MonoSignal(samples, self.sample_rate)


@dataclass(frozen=True)
class StereoRecording:
    """Sample-synchronized speech and EGG channels."""

    speech: MonoSignal
    egg: MonoSignal

    def __post_init__(self):
        if self.speech.sample_rate != self.egg.sample_rate:
            raise ValueError(
                f"speech and egg rates differ: {self.speech.sample_rate} vs {self.egg.sample_rate}"
            )
        if len(self.speech) != len(self.egg):
            raise ValueError(f"speech and egg lengths differ: {len(self.speech)} vs {len(self.egg)}")

    @property
    def sample_rate(self) -> int:
        return self.speech.sample_rate


def _to_float(data: np.ndarray) -> np.ndarray:
    # scipy returns 24-bit PCM left-justified in int32, so 2**31 scales both.
    if data.dtype == np.int16:
        return data.astype(np.float64) / 2**15
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2**31
    if data.dtype == np.float32:
        return data.astype(np.float64)
    raise UnsupportedEncodingError(
        f"unsupported sample encoding {data.dtype}; expected PCM 16/24/32-bit or float32"
    )


def _read_raw(path) -> tuple[int, np.ndarray]:
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        msg = str(exc)
        if "format" in msg.lower() and ("bit" in msg.lower() or "unsupported" in msg.lower()):
            raise UnsupportedEncodingError(f"{path}: {msg}") from exc
        raise WavFormatError(f"{path}: not a readable WAV file ({msg})") from exc
    return int(rate), data


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read any 1- or 2-channel WAV; returns (float64 array [n] or [n, ch], rate)."""
    rate, data = _read_raw(path)
    return _to_float(data), rate


def read_recording(path, speech_channel: str = "left") -> StereoRecording:
    """Load a two-track speech/EGG file.

    ``speech_channel`` names the channel holding speech; the EGG is the other.
    """
    if speech_channel not in ("left", "right"):
        raise ValueError(f"speech_channel must be 'left' or 'right', got {speech_channel!r}")
    rate, data = _read_raw(path)
    channels = 1 if data.ndim == 1 else data.shape[1]
    if channels != 2:
        raise ChannelCountError(2, channels)
    x = _to_float(data)
    s_idx = 0 if speech_channel == "left" else 1
    return StereoRecording(
        speech=MonoSignal(x[:, s_idx], rate),
        egg=MonoSignal(x[:, 1 - s_idx], rate),
    )


def _quantize(x: np.ndarray, bits: int) -> np.ndarray:
    scale = 2 ** (bits - 1)
    q = np.round(x * scale)
    return np.clip(q, -scale, scale - 1).astype(np.int64)


def _write_pcm(path, data: np.ndarray, rate: int, bits: int):
    q = _quantize(data, bits)
    nch = 1 if q.ndim == 1 else q.shape[1]
    width = bits // 8
    raw = q.astype("<i4").reshape(-1).view(np.uint8).reshape(-1, 4)[:, :width]
    with wave.open(path, "wb") as w:
        w.setnchannels(nch)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(raw.tobytes())


def write_audio(path, data: np.ndarray, sample_rate: int, bit_depth: str = "24"):
    """Write a float array ([n] or [n, ch]) atomically (temp file + rename)."""
    bit_depth = str(bit_depth)
    if bit_depth not in BIT_DEPTHS:
        raise ValueError(f"bit_depth must be one of {BIT_DEPTHS}, got {bit_depth!r}")
    data = np.asarray(data, dtype=np.float64)
    if data.shape[0] == 0:
        raise ValueError("cannot write an empty signal")
    peak = np.max(np.abs(data))
    if peak > 1.0:
        log.warning("clipping %d samples exceeding full scale (peak %.3f)",
                    int(np.sum(np.abs(data) > 1.0)), peak)
        data = np.clip(data, -1.0, 1.0)

    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(suffix=".wav.tmp", dir=directory)
    os.close(fd)
    try:
        if bit_depth == "float32":
            wavfile.write(tmp, int(sample_rate), data.astype(np.float32))
        else:
            _write_pcm(tmp, data, int(sample_rate), int(bit_depth))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_wav(signal: MonoSignal, path, bit_depth: str = "24"):
    write_audio(path, signal.samples, signal.sample_rate, bit_depth)


def write_recording(recording: StereoRecording, path, bit_depth: str = "24"):
    """Write speech on the left channel and EGG on the right."""
    data = np.column_stack([recording.speech.samples, recording.egg.samples])
    write_audio(path, data, recording.sample_rate, bit_depth)


def _integer_factor(high: int, low: int) -> int:
    if low >= high:
        raise ValueError(f"target rate {low} must be below source rate {high}")
    if high % low:
        raise ValueError(f"{low} Hz does not divide {high} Hz: non-integer factor")
    return high // low


def _unit_dc(sos: np.ndarray, fs: int) -> np.ndarray:
    # even-order elliptic designs sit at -ripple at DC; lift them to exactly 1
    _, h0 = sps.sosfreqz(sos, worN=[0.0], fs=fs)
    sos = sos.copy()
    sos[0, :3] /= np.real(h0[0])
    return sos


def decimation_filter(source_rate: int, target_rate: int) -> np.ndarray:
    edge = DECIM_EDGE * target_rate / 2
    sos = sps.ellip(DECIM_ORDER, DECIM_RIPPLE_DB, DECIM_STOP_DB, edge,
                    fs=source_rate, output="sos")
    return _unit_dc(sos, source_rate)


def resample_down(signal: MonoSignal, target_rate: int) -> MonoSignal:
    """Zero-phase anti-alias filter, then keep every ``factor``-th sample."""
    factor = _integer_factor(signal.sample_rate, int(target_rate))
    x = signal.samples
    if len(x) == 0:
        return MonoSignal(x, target_rate)
    sos = decimation_filter(signal.sample_rate, target_rate)
    padlen = min(3 * (2 * len(sos) + 1), len(x) - 1)
    y = sps.sosfiltfilt(sos, x, padlen=max(padlen, 0))
    return MonoSignal(y[::factor], target_rate)


def interpolation_filter(factor: int, input_rate: int) -> np.ndarray:
    fs = factor * input_rate
    sos = sps.ellip(INTERP_ORDER, INTERP_RIPPLE_DB, INTERP_STOP_DB, input_rate / 2,
                    fs=fs, output="sos")
    return _unit_dc(sos, fs)


def interpolate_impulse_response(h: MonoSignal, factor: int) -> MonoSignal:
    """Zero insertion by ``factor`` followed by a causal 4th-order low-pass.

    The low-pass is causal so a minimum-phase input stays minimum phase.
    Output length is ``factor * len(h)``.
    """
    if int(factor) != factor or factor < 2:
        raise ValueError(f"interpolation factor must be an integer >= 2, got {factor}")
    factor = int(factor)
    if len(h) == 0:
        raise ValueError("cannot interpolate an empty impulse response")
    up = np.zeros(len(h) * factor)
    up[::factor] = h.samples * factor
    y = sps.sosfilt(interpolation_filter(factor, h.sample_rate), up)
    return MonoSignal(y, h.sample_rate * factor)


def pad_silence(signal: MonoSignal, lead_ms: float = 50.0, trail_ms: float = 50.0) -> MonoSignal:
    if lead_ms < 0 or trail_ms < 0:
        raise ValueError("padding durations must be non-negative")
    lead = int(round(lead_ms * signal.sample_rate / 1000))
    trail = int(round(trail_ms * signal.sample_rate / 1000))
    return signal.with_samples(np.concatenate([np.zeros(lead), signal.samples, np.zeros(trail)]))


def peak_normalize(signal: MonoSignal, target_dbfs: float = -1.0) -> MonoSignal:
    peak = np.max(np.abs(signal.samples)) if len(signal) else 0.0
    if peak == 0.0:
        raise ValueError("cannot normalize an all-zero signal")
    target = 10.0 ** (target_dbfs / 20.0)
    return signal.with_samples(signal.samples * (target / peak))
