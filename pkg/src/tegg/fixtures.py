"""Synthetic source-filter signals with known ground truth.

Speech is an excitation pushed through cascaded two-pole resonators; the
simulated EGG is the Rosenberg glottal pulse that drove it.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .signal_io import MonoSignal, StereoRecording

PULSE_SHAPES = ("impulse-train", "rosenberg")
ROSENBERG_OPEN = 0.6
ROSENBERG_CLOSE = 0.3
CROSSFADE_MS = 5.0

# Formants above F3 shared by every vowel. Without them a short resonator
# cascade carries a steep overall tilt that inverse filtering (rightly)
# assigns to the glottal source instead of the tract.
UPPER_FORMANTS = ((3500.0, 150.0), (4500.0, 200.0), (5500.0, 250.0),
                  (6500.0, 300.0), (7500.0, 300.0))


def vowel(*low_formants) -> tuple:
    return tuple(low_formants) + UPPER_FORMANTS


VOWEL_A = vowel((700.0, 80.0), (1200.0, 90.0), (2600.0, 120.0))
VOWEL_I = vowel((300.0, 70.0), (2300.0, 100.0), (3000.0, 120.0))
VOWEL_E = vowel((500.0, 80.0), (1800.0, 100.0), (2500.0, 120.0))
VOWEL_U = vowel((350.0, 70.0), (800.0, 90.0), (2300.0, 120.0))


@dataclass(frozen=True)
class FormantTrack:
    """Piecewise-constant tract: ``segments`` is [(duration_ms, [(fc, bw), ...]), ...]."""

    segments: tuple

    def __post_init__(self):
        segs = tuple((float(d), tuple((float(fc), float(bw)) for fc, bw in res))
                     for d, res in self.segments)
        for dur, res in segs:
            if dur <= 0:
                raise ValueError("segment durations must be positive")
            for fc, bw in res:
                if bw <= 0:
                    raise ValueError(f"bandwidth must be positive, got {bw}")
                if fc <= 0:
                    raise ValueError(f"center frequency must be positive, got {fc}")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def stationary(cls, resonances, duration_ms: float) -> "FormantTrack":
        return cls(((duration_ms, resonances),))

    @classmethod
    def alternating(cls, first, second, segment_ms: float, total_ms: float) -> "FormantTrack":
        n = int(np.ceil(total_ms / segment_ms))
        return cls(tuple((segment_ms, first if i % 2 == 0 else second) for i in range(n)))

    @property
    def duration_ms(self) -> float:
        return sum(d for d, _ in self.segments)


def resonator_coeffs(fc: float, bw: float, sample_rate: int) -> tuple[np.ndarray, np.ndarray]:
    """Two-pole resonator with unit DC gain."""
    if fc >= sample_rate / 2:
        raise ValueError(f"resonance {fc} Hz at or above Nyquist {sample_rate / 2} Hz")
    r = np.exp(-np.pi * bw / sample_rate)
    theta = 2 * np.pi * fc / sample_rate
    a = np.array([1.0, -2 * r * np.cos(theta), r * r])
    return np.array([a.sum()]), a


def tract_denominator(resonances, sample_rate: int) -> tuple[float, np.ndarray]:
    """Cascade of resonators as a single (gain, denominator) pair."""
    gain, den = 1.0, np.array([1.0])
    for fc, bw in resonances:
        b, a = resonator_coeffs(fc, bw, sample_rate)
        gain *= b[0]
        den = np.convolve(den, a)
    return gain, den


def tract_magnitude(resonances, freqs, sample_rate: int) -> np.ndarray:
    """True |H(f)| of the resonator cascade at arbitrary frequencies."""
    gain, den = tract_denominator(resonances, sample_rate)
    z = np.exp(-1j * 2 * np.pi * np.asarray(freqs) / sample_rate)
    return np.abs(gain / np.polyval(den[::-1], z))


def rosenberg_pulse(period: int, open_frac: float = ROSENBERG_OPEN,
                    close_frac: float = ROSENBERG_CLOSE) -> np.ndarray:
    n_open = max(1, int(round(open_frac * period)))
    n_close = max(1, int(round(close_frac * period)))
    t_open = np.arange(n_open) / n_open
    t_close = np.arange(n_close) / n_close
    pulse = np.zeros(period)
    pulse[:n_open] = 0.5 * (1 - np.cos(np.pi * t_open))
    pulse[n_open:n_open + n_close] = np.cos(0.5 * np.pi * t_close)
    return pulse


def synth_glottal_source(f0: float, duration: float, sample_rate: int,
                         pulse_shape: str = "impulse-train") -> MonoSignal:
    """Periodic glottal excitation. Pulse onsets fall at round(k * fs / f0)."""
    if not 0 < f0 < sample_rate / 4:
        raise ValueError(f"f0 must be in (0, {sample_rate / 4}) Hz, got {f0}")
    if pulse_shape not in PULSE_SHAPES:
        raise ValueError(f"pulse_shape must be one of {PULSE_SHAPES}")
    n = int(round(duration * sample_rate))
    period = sample_rate / f0
    onsets = np.round(np.arange(0, n / period) * period).astype(int)
    onsets = onsets[onsets < n]
    x = np.zeros(n)
    if pulse_shape == "impulse-train":
        x[onsets] = 1.0
    else:
        pulse = rosenberg_pulse(int(round(period)))
        for t in onsets:
            seg = pulse[: n - t]
            x[t:t + len(seg)] = seg
    return MonoSignal(x, sample_rate)


def synth_speech(source: MonoSignal, track: FormantTrack,
                 crossfade_ms: float = CROSSFADE_MS) -> MonoSignal:
    """Filter ``source`` segment by segment through the track's resonators.

    Each segment's filter runs over the whole source so there is no state
    reset at boundaries; outputs are joined with linear crossfades. The last
    segment extends to cover any remainder of the source.
    """
    fs = source.sample_rate
    x = source.samples
    n = len(x)
    if track.duration_ms * fs / 1000 + 0.5 < n:
        raise ValueError("formant track is shorter than the source")
    for _, res in track.segments:
        for fc, _bw in res:
            if fc >= fs / 2:
                raise ValueError(f"resonance {fc} Hz at or above Nyquist {fs / 2} Hz")

    bounds = np.round(np.cumsum([0.0] + [d for d, _ in track.segments]) * fs / 1000).astype(int)
    half = max(1, int(round(crossfade_ms * fs / 1000)) // 2)
    t = np.arange(n)
    out = np.zeros(n)
    cache = {}
    for i, (_, res) in enumerate(track.segments):
        start, stop = bounds[i], bounds[i + 1]
        if start >= n:
            break
        if i == len(track.segments) - 1 or stop >= n:
            stop = n + half + 1
        rise = np.ones(n) if i == 0 else np.clip((t - (start - half)) / (2 * half), 0, 1)
        fall = np.clip(((stop + half) - t) / (2 * half), 0, 1)
        weight = np.minimum(rise, fall)
        if not np.any(weight):
            continue
        if res not in cache:
            gain, den = tract_denominator(res, fs)
            cache[res] = lfilter([gain], den, x)
        out += weight * cache[res]
    return MonoSignal(out, fs)


def synth_pair(f0: float = 120.0, duration: float = 1.0, sample_rate: int = 48000,
               track: FormantTrack | None = None, jitter: float = 0.0,
               amplitude_contour=None, noise_db: float | None = -80.0,
               seed: int | None = None) -> StereoRecording:
    """Speech/EGG pair sharing one excitation.

    The excitation is the derivative of a Rosenberg pulse train (glottal flow
    with lip radiation folded in). The simulated EGG channel is that
    excitation; the speech channel is the excitation through ``track``.

    ``amplitude_contour`` is an optional callable t_seconds -> gain applied to
    the source before filtering. ``jitter`` perturbs periods by that relative
    standard deviation.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    if track is None:
        track = FormantTrack.stationary(VOWEL_A, duration * 1000)
    if jitter > 0:
        flow = np.zeros(n)
        t = 0.0
        while t < n:
            period = sample_rate / f0 * (1 + jitter * rng.standard_normal())
            period = max(period, 4.0)
            pulse = rosenberg_pulse(int(round(period)))
            i = int(round(t))
            seg = pulse[: max(0, n - i)]
            flow[i:i + len(seg)] = seg
            t += period
    else:
        flow = synth_glottal_source(f0, duration, sample_rate, "rosenberg").samples.copy()
    if amplitude_contour is not None:
        flow *= amplitude_contour(np.arange(n) / sample_rate)
    excitation = np.diff(flow, prepend=0.0)
    speech = synth_speech(MonoSignal(excitation, sample_rate), track).samples
    speech = speech / max(np.max(np.abs(speech)), 1e-12) * 0.5
    egg_out = excitation / max(np.max(np.abs(excitation)), 1e-12) * 0.5
    if noise_db is not None:
        level = 10 ** (noise_db / 20)
        speech = speech + level * rng.standard_normal(n)
        egg_out = egg_out + level * rng.standard_normal(n)
    return StereoRecording(MonoSignal(speech, sample_rate), MonoSignal(egg_out, sample_rate))


def random_pair(seed: int, duration: float = 1.0, sample_rate: int = 48000) -> StereoRecording:
    """Randomized fixture: f0, vowel pair, segment length, jitter and a
    syllable-like amplitude contour all drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    f0 = float(rng.uniform(90, 240))
    vowels = [VOWEL_A, VOWEL_I, VOWEL_E, VOWEL_U]
    i, j = rng.choice(len(vowels), size=2, replace=False)
    seg_ms = float(rng.uniform(120, 300))
    track = FormantTrack.alternating(vowels[i], vowels[j], seg_ms, duration * 1000)
    rate_hz = float(rng.uniform(2.5, 5.0))
    depth = float(rng.uniform(0.3, 0.8))
    phase = float(rng.uniform(0, 2 * np.pi))

    def contour(t):
        return 1.0 - depth * 0.5 * (1 + np.cos(2 * np.pi * rate_hz * t + phase))

    return synth_pair(f0, duration, sample_rate, track, jitter=float(rng.uniform(0, 0.01)),
                      amplitude_contour=contour, seed=int(rng.integers(2**31)))
