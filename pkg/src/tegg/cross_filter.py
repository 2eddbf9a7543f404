"""Stage two (envelope cross-filtering) and the end-to-end transform.

The EGG is convolved with the averaged tract response h to give y; every STFT
column of y is then rescaled so that its summed bin magnitude equals that of
the speech column at the same time step:

    R[n] = sum_f |S_f[n]| / sum_f |Y_f[n]|,    Z = Y diag(R)

R scales complex bins, so Y's phase carries through to z.
"""

import json
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy import signal as sps

from .errors import F0EstimationError, NoVoicedFramesError, SilentEggError
from .signal_io import MonoSignal, StereoRecording, pad_silence, peak_normalize, resample_down
from .spectral import FrameSpec, Spectrogram, frame_centers, istft, stft
from .vad import VadConfig, VoiceMask, detect_voice, extract_voiced
from .vocal_tract import DEFAULT_GRID, DEFAULT_TAPS, AvgVocalTract, estimate_vocal_tract

DIAGNOSTICS_SCHEMA_VERSION = 1

F0_MIN = 50.0
F0_MAX = 500.0
F0_MIN_PEAK = 0.3
F0_WINDOW_S = 3 / F0_MIN  # three periods of the lowest f0
HIGHPASS_OFFSET_HZ = 20.0
HIGHPASS_ORDER = 4
HIGHPASS_RIPPLE_DB = 0.25


@dataclass(frozen=True)
class Envelope:
    values: np.ndarray

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class ModulationVector:
    values: np.ndarray
    guard_mask: np.ndarray

    def __len__(self):
        return len(self.values)

    @property
    def guard_frames(self) -> int:
        return int(np.sum(self.guard_mask))


@dataclass(frozen=True)
class TransformConfig:
    frame_ms: float = 20.0
    overlap: float = 0.5
    lpc_rate: int = 16000
    output_rate: int | None = None  # None: the recording's own rate
    grid_size: int = DEFAULT_GRID
    n_taps: int = DEFAULT_TAPS
    vad: VadConfig = field(default_factory=VadConfig)
    guard_rel: float = 1e-10
    r_max: float = 1e4
    egg_highpass: bool = False
    egg_f0: float | None = None

    def frame_spec(self, sample_rate: int) -> FrameSpec:
        return FrameSpec(self.frame_ms, self.overlap, sample_rate)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TransformConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if isinstance(data.get("vad"), dict):
            data["vad"] = VadConfig(**data["vad"])
        return cls(**data)

    def updated(self, **changes) -> "TransformConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


@dataclass
class Diagnostics:
    frames_used: int = 0
    frames_skipped: int = 0
    guard_frames: int = 0
    f0_estimate: float | None = None
    runtime_ms: float = 0.0
    realtime_factor: float = 0.0
    vad_mask: VoiceMask | None = None
    tract: AvgVocalTract | None = None
    ratio: ModulationVector | None = None
    output_spec: FrameSpec | None = None
    signal_length: int = 0

    def to_dict(self) -> dict:
        return {
            "schema_version": DIAGNOSTICS_SCHEMA_VERSION,
            "frames_used": self.frames_used,
            "frames_skipped": self.frames_skipped,
            "guard_frames": self.guard_frames,
            "f0_estimate": self.f0_estimate,
            "runtime_ms": self.runtime_ms,
            "realtime_factor": self.realtime_factor,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def magnitude_csv(self) -> str:
        mag = self.tract.mean_magnitude
        rows = ["frequency_hz,magnitude"]
        rows += [f"{f:.6f},{m:.9e}" for f, m in zip(mag.freqs, mag.magnitudes)]
        return "\n".join(rows) + "\n"

    def ratio_csv(self) -> str:
        centers = frame_centers(self.signal_length, self.output_spec) / self.output_spec.sample_rate
        rows = ["frame,time_s,ratio,guarded"]
        rows += [f"{n},{t:.6f},{r:.9e},{int(g)}" for n, (t, r, g) in
                 enumerate(zip(centers, self.ratio.values, self.ratio.guard_mask))]
        return "\n".join(rows) + "\n"


def convolve(g: MonoSignal, h: MonoSignal) -> MonoSignal:
    """Linear convolution truncated to ``len(g)`` so frame grids stay aligned."""
    if g.sample_rate != h.sample_rate:
        raise ValueError(f"sample rates differ: {g.sample_rate} vs {h.sample_rate}")
    if len(g) == 0 or len(h) == 0:
        raise ValueError("cannot convolve an empty signal")
    y = sps.fftconvolve(g.samples, h.samples)[: len(g)]
    return g.with_samples(y)


def energy_envelope(spectrogram: Spectrogram) -> Envelope:
    """Sum of one-sided bin magnitudes per frame."""
    return Envelope(np.abs(spectrogram.bins).sum(axis=0))


def modulation_ratio(e_s: Envelope, e_y: Envelope, epsilon: float, r_max: float = 1e4) -> ModulationVector:
    if len(e_s) != len(e_y):
        raise ValueError(f"envelope lengths differ: {len(e_s)} vs {len(e_y)}")
    num = np.asarray(e_s.values, dtype=np.float64)
    den = np.asarray(e_y.values, dtype=np.float64)
    guard = den <= epsilon
    r = np.zeros_like(num)
    np.divide(num, den, out=r, where=~guard)
    return ModulationVector(np.minimum(r, r_max), guard)


def apply_ratio(y_spec: Spectrogram, r: ModulationVector) -> Spectrogram:
    """Z = Y diag(R): column n of Y scaled by R[n]."""
    if len(r) != y_spec.n_frames:
        raise ValueError(f"ratio has {len(r)} entries for {y_spec.n_frames} frames")
    return y_spec.with_bins(y_spec.bins * r.values[None, :])


@dataclass(frozen=True)
class CrossFilterResult:
    z: MonoSignal
    ratio: ModulationVector
    speech_env: Envelope
    source_env: Envelope
    z_spec: Spectrogram


def cross_filter(speech: MonoSignal, y: MonoSignal, spec: FrameSpec,
                 guard_rel: float = 1e-10, r_max: float = 1e4) -> CrossFilterResult:
    """Impose the speech's short-time energy envelope on ``y``."""
    if len(speech) != len(y) or speech.sample_rate != y.sample_rate:
        raise ValueError("speech and filtered source must share length and rate")
    s_spec = stft(speech, spec)
    y_spec = stft(y, spec)
    e_s, e_y = energy_envelope(s_spec), energy_envelope(y_spec)
    epsilon = guard_rel * float(np.max(e_y.values))
    r = modulation_ratio(e_s, e_y, epsilon, r_max)
    if np.all(r.guard_mask):
        raise SilentEggError()
    z_spec = apply_ratio(y_spec, r)
    return CrossFilterResult(istft(z_spec), r, e_s, e_y, z_spec)


def _parabolic_peak(r: np.ndarray, i: int) -> float:
    if 0 < i < len(r) - 1:
        a, b, c = r[i - 1], r[i], r[i + 1]
        denom = a - 2 * b + c
        if denom < 0:
            return i + 0.5 * (a - c) / denom
    return float(i)


def _frame_f0(x: np.ndarray, fs: int, min_lag: int, max_lag: int) -> float | None:
    x = x - np.mean(x)
    n = len(x)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, nfft)
    r = np.fft.irfft(np.abs(spec) ** 2, nfft)[: max_lag + 2]
    if r[0] <= 0:
        return None
    r = r / r[0]
    seg = r[min_lag:max_lag + 1]
    best = int(np.argmax(seg))
    if seg[best] < F0_MIN_PEAK:
        return None
    # earliest local maximum close to the global one guards against octave errors
    for i in range(1, len(seg) - 1):
        if seg[i] >= seg[i - 1] and seg[i] >= seg[i + 1] and seg[i] >= 0.9 * seg[best]:
            best = i
            break
    lag = _parabolic_peak(r, best + min_lag)
    return fs / lag


def estimate_f0(signal: MonoSignal, mask: VoiceMask) -> float:
    """Median autocorrelation f0 over voiced frames, searched in 50-500 Hz."""
    if mask.spec.sample_rate != signal.sample_rate or mask.signal_length != len(signal):
        raise ValueError("mask does not match signal")
    voiced = np.flatnonzero(mask.frame_flags)
    if voiced.size == 0:
        raise NoVoicedFramesError()
    fs = signal.sample_rate
    n_win = int(round(F0_WINDOW_S * fs))
    min_lag, max_lag = int(np.floor(fs / F0_MAX)), int(np.ceil(fs / F0_MIN))
    x = np.concatenate([np.zeros(n_win), signal.samples, np.zeros(n_win)])
    centers = frame_centers(len(signal), mask.spec)[voiced]
    estimates = []
    for c in centers:
        start = int(round(c)) - n_win // 2 + n_win
        seg = x[start:start + n_win]
        if not np.any(seg):
            continue
        f0 = _frame_f0(seg, fs, min_lag, max_lag)
        if f0 is not None:
            estimates.append(f0)
    if not estimates:
        raise F0EstimationError()
    return float(np.median(estimates))


def egg_highpass_cutoff(f0: float) -> float:
    return f0 - HIGHPASS_OFFSET_HZ


def adaptive_highpass_egg(g: MonoSignal, f0: float) -> MonoSignal:
    """Zero-phase Chebyshev-I high-pass with its passband edge 20 Hz below f0."""
    if f0 <= HIGHPASS_OFFSET_HZ + 5:
        raise ValueError(f"f0 must exceed {HIGHPASS_OFFSET_HZ + 5:g} Hz, got {f0}")
    sos = sps.cheby1(HIGHPASS_ORDER, HIGHPASS_RIPPLE_DB, egg_highpass_cutoff(f0),
                     btype="highpass", fs=g.sample_rate, output="sos")
    padlen = min(3 * (2 * len(sos) + 1), len(g) - 1)
    return g.with_samples(sps.sosfiltfilt(sos, g.samples, padlen=max(padlen, 0)))


def _lpc_path(speech: MonoSignal, lpc_rate: int) -> MonoSignal:
    if speech.sample_rate == lpc_rate:
        return speech
    return resample_down(speech, lpc_rate)


def analyze(recording: StereoRecording, config: TransformConfig = TransformConfig()):
    """Stage one only: VAD and the averaged tract. Returns (tract, mask, lpc-rate speech)."""
    fs = recording.sample_rate
    if config.output_rate is not None and config.output_rate != fs:
        raise ValueError(f"recording is at {fs} Hz but output_rate is {config.output_rate}")
    if fs < config.lpc_rate or fs % config.lpc_rate:
        raise ValueError(f"recording rate {fs} must be an integer multiple of lpc_rate {config.lpc_rate}")
    speech_lpc = _lpc_path(recording.speech, config.lpc_rate)
    spec_lpc = config.frame_spec(config.lpc_rate)
    if len(speech_lpc) < spec_lpc.win_length:
        raise NoVoicedFramesError("no voiced frames: recording shorter than one analysis window")
    mask = detect_voice(speech_lpc, spec_lpc, config.vad)
    if not np.any(mask.frame_flags):
        raise NoVoicedFramesError()
    voiced = extract_voiced(speech_lpc, mask)
    if len(voiced) < spec_lpc.win_length:
        raise NoVoicedFramesError("no voiced frames: voiced span shorter than one window")
    tract = estimate_vocal_tract(voiced, spec_lpc, fs, config.grid_size, config.n_taps)
    return tract, mask, speech_lpc


def transform(recording: StereoRecording,
              config: TransformConfig = TransformConfig()) -> tuple[MonoSignal, Diagnostics]:
    """Full two-stage transform. Output has the speech channel's length and rate."""
    t0 = time.perf_counter()
    tract, mask, speech_lpc = analyze(recording, config)
    diag = Diagnostics(frames_used=tract.frames_used, frames_skipped=tract.frames_skipped,
                       vad_mask=mask, tract=tract)

    egg = recording.egg
    if config.egg_highpass:
        f0 = config.egg_f0 if config.egg_f0 is not None else estimate_f0(speech_lpc, mask)
        diag.f0_estimate = float(f0)
        egg = adaptive_highpass_egg(egg, f0)

    y = convolve(egg, tract.impulse_response)
    result = cross_filter(recording.speech, y, config.frame_spec(recording.sample_rate),
                          config.guard_rel, config.r_max)
    diag.ratio = result.ratio
    diag.output_spec = result.z_spec.spec
    diag.signal_length = len(recording.speech)
    diag.guard_frames = result.ratio.guard_frames

    wall = time.perf_counter() - t0
    diag.runtime_ms = wall * 1000
    diag.realtime_factor = recording.speech.duration / wall if wall > 0 else float("inf")
    return result.z, diag


def finalize(z: MonoSignal, pad_ms: float | None = None, normalize_dbfs: float | None = None) -> MonoSignal:
    """Optional packaging: silence padding on both ends, then peak normalization."""
    if pad_ms:
        z = pad_silence(z, pad_ms, pad_ms)
    if normalize_dbfs is not None:
        z = peak_normalize(z, normalize_dbfs)
    return z
