"""Framing, STFT/ISTFT, all-pole response evaluation and minimum-phase FIR design.

Overlap-add convention: the analysis window is applied once; synthesis
overlap-adds the raw inverse frames and divides by the constant window sum.
This is exact only for COLA window/hop pairs, which FrameSpec enforces.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import UnstableFilterError
from .signal_io import MonoSignal

WINDOW_KINDS = ("hamming", "rectangular")


def periodic_hamming(n: int) -> np.ndarray:
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2 * np.pi * k / n)


def next_pow2(n: int) -> int:
    return 1 << max(0, int(np.ceil(np.log2(n))))


@dataclass(frozen=True)
class FrameSpec:
    window_ms: float = 20.0
    overlap_fraction: float = 0.5
    sample_rate: int = 16000
    window_kind: str = "hamming"

    def __post_init__(self):
        if not 0 < self.overlap_fraction < 1:
            raise ValueError(f"overlap_fraction must be in (0, 1), got {self.overlap_fraction}")
        if self.window_kind not in WINDOW_KINDS:
            raise ValueError(f"window_kind must be one of {WINDOW_KINDS}")
        if self.win_length < 2:
            raise ValueError("window must span at least 2 samples")
        hop = self.win_length * (1 - self.overlap_fraction)
        if abs(hop - round(hop)) > 1e-9 or round(hop) < 1:
            raise ValueError(
                f"hop of {hop:g} samples is not an integer "
                f"(window {self.win_length}, overlap {self.overlap_fraction})"
            )

    @property
    def win_length(self) -> int:
        return int(round(self.window_ms * self.sample_rate / 1000))

    @property
    def hop(self) -> int:
        return int(round(self.win_length * (1 - self.overlap_fraction)))

    @property
    def window(self) -> np.ndarray:
        if self.window_kind == "rectangular":
            return np.ones(self.win_length)
        return periodic_hamming(self.win_length)

    @property
    def fft_size(self) -> int:
        return next_pow2(self.win_length)

    def ola_sum(self) -> np.ndarray:
        """Steady-state sum of shifted windows over one hop period."""
        w = self.window
        n, h = self.win_length, self.hop
        acc = np.zeros(h)
        for start in range(0, n, h):
            seg = w[start:start + h]
            acc[: len(seg)] += seg
        return acc

    def is_cola(self, rtol: float = 1e-9) -> bool:
        s = self.ola_sum()
        return bool(np.ptp(s) <= rtol * np.max(np.abs(s)))

    @property
    def cola_gain(self) -> float:
        if not self.is_cola():
            raise ValueError(
                f"{self.window_kind} window with hop {self.hop}/{self.win_length} "
                "does not satisfy constant overlap-add"
            )
        return float(np.mean(self.ola_sum()))

    def with_rate(self, sample_rate: int) -> "FrameSpec":
        return FrameSpec(self.window_ms, self.overlap_fraction, sample_rate, self.window_kind)


@dataclass(frozen=True)
class FrameLayout:
    """Where the padded analysis grid sits relative to the input samples."""

    pad_front: int
    n_frames: int
    padded_length: int
    signal_length: int


def frame_layout(length: int, spec: FrameSpec) -> FrameLayout:
    win, hop = spec.win_length, spec.hop
    if length < win:
        raise ValueError(f"signal of {length} samples is shorter than one window ({win})")
    pad_front = win - hop
    n_frames = (pad_front + length - 1) // hop + 1
    return FrameLayout(pad_front, n_frames, (n_frames - 1) * hop + win, length)


def frame_signal(signal: MonoSignal, spec: FrameSpec, apply_window: bool = True) -> np.ndarray:
    """Return frames as an array of shape (n_frames, win_length).

    The input is zero padded at both ends so every input sample is covered
    by a full complement of overlapping windows.
    """
    if signal.sample_rate != spec.sample_rate:
        raise ValueError(f"signal rate {signal.sample_rate} != frame spec rate {spec.sample_rate}")
    lay = frame_layout(len(signal), spec)
    padded = np.zeros(lay.padded_length)
    padded[lay.pad_front:lay.pad_front + len(signal)] = signal.samples
    idx = np.arange(lay.n_frames)[:, None] * spec.hop + np.arange(spec.win_length)[None, :]
    frames = padded[idx]
    if apply_window:
        frames = frames * spec.window
    return frames


def frame_centers(length: int, spec: FrameSpec) -> np.ndarray:
    """Frame center positions in input-sample coordinates (may fall outside)."""
    lay = frame_layout(length, spec)
    return np.arange(lay.n_frames) * spec.hop - lay.pad_front + spec.win_length / 2


@dataclass(frozen=True)
class Spectrogram:
    bins: np.ndarray  # (F, N) complex, one-sided
    spec: FrameSpec
    fft_size: int
    signal_length: int

    def __post_init__(self):
        b = np.array(self.bins, dtype=np.complex128, copy=True)
        if b.ndim != 2 or b.shape[0] != self.fft_size // 2 + 1:
            raise ValueError(f"bins must have shape ({self.fft_size // 2 + 1}, N), got {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ValueError("spectrogram entries must be finite")
        b.setflags(write=False)
        object.__setattr__(self, "bins", b)

    @property
    def n_frames(self) -> int:
        return self.bins.shape[1]

    def with_bins(self, bins) -> "Spectrogram":
        return Spectrogram(bins, self.spec, self.fft_size, self.signal_length)


def stft(signal: MonoSignal, spec: FrameSpec, fft_size: int | None = None) -> Spectrogram:
    fft_size = spec.fft_size if fft_size is None else int(fft_size)
    if fft_size < spec.win_length:
        raise ValueError(f"fft_size {fft_size} smaller than window {spec.win_length}")
    if fft_size & (fft_size - 1):
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    frames = frame_signal(signal, spec)
    bins = np.fft.rfft(frames, n=fft_size, axis=1).T
    return Spectrogram(bins, spec, fft_size, len(signal))


def istft(spectrogram: Spectrogram) -> MonoSignal:
    spec = spectrogram.spec
    if spectrogram.n_frames == 0:
        raise ValueError("cannot invert an empty spectrogram")
    lay = frame_layout(spectrogram.signal_length, spec)
    if lay.n_frames != spectrogram.n_frames:
        raise ValueError(
            f"spectrogram has {spectrogram.n_frames} frames, expected {lay.n_frames} "
            f"for {spectrogram.signal_length} samples"
        )
    win, hop = spec.win_length, spec.hop
    frames = np.fft.irfft(spectrogram.bins.T, n=spectrogram.fft_size, axis=1)[:, :win]
    out = np.zeros(lay.padded_length)
    for n, frame in enumerate(frames):
        out[n * hop:n * hop + win] += frame
    out /= spec.cola_gain
    return MonoSignal(out[lay.pad_front:lay.pad_front + lay.signal_length], spec.sample_rate)


@dataclass(frozen=True)
class MagnitudeResponse:
    """Non-negative magnitudes on the one-sided grid of a ``grid_size``-point FFT."""

    magnitudes: np.ndarray
    grid_size: int
    sample_rate: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        m = np.array(self.magnitudes, dtype=np.float64, copy=True).reshape(-1)
        if m.shape[0] != self.grid_size // 2 + 1:
            raise ValueError(f"expected {self.grid_size // 2 + 1} grid points, got {m.shape[0]}")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("magnitudes must be finite and non-negative")
        m.setflags(write=False)
        object.__setattr__(self, "magnitudes", m)

    @property
    def freqs(self) -> np.ndarray:
        return np.fft.rfftfreq(self.grid_size, 1.0 / self.sample_rate)

    def db(self, floor: float = 1e-12) -> np.ndarray:
        return 20 * np.log10(np.maximum(self.magnitudes, floor))


def evaluate_all_pole_response(a, grid_size: int = 4096) -> np.ndarray:
    """Sample 1/A(e^jw) on the one-sided grid of a ``grid_size``-point FFT."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.size == 0 or a[0] != 1.0:
        raise ValueError("denominator must be a 1-D vector with a[0] == 1")
    if grid_size < 2 * a.size:
        raise ValueError(f"grid_size {grid_size} too small for {a.size} coefficients")
    denom = np.fft.rfft(a, n=grid_size)
    if np.min(np.abs(denom)) < 1e-12:
        raise UnstableFilterError("all-pole denominator has a zero on the unit circle")
    return 1.0 / denom


def min_phase_fir(target: MagnitudeResponse, n_taps: int = 2048, taper: int = 256,
                  floor: float = 1e-8) -> MonoSignal:
    """Minimum-phase impulse response with the given magnitude.

    Folded real cepstrum of the log-magnitude (the Hilbert-transform relation
    between log-magnitude and minimum phase). Magnitudes are floored at
    ``floor * max`` before the log. The last ``taper`` taps (capped at 1/8 of
    the length) get a half-Hann fade.
    """
    mags = target.magnitudes
    peak = np.max(mags)
    if peak <= 0:
        raise ValueError("target magnitude is all zero")
    n_fft = target.grid_size
    if not 1 <= n_taps <= n_fft:
        raise ValueError(f"n_taps must be in [1, {n_fft}], got {n_taps}")

    log_mag = np.log(np.maximum(mags, floor * peak))
    cep = np.fft.irfft(log_mag, n=n_fft)
    fold = np.zeros(n_fft)
    fold[0] = cep[0]
    fold[1:n_fft // 2] = 2 * cep[1:n_fft // 2]
    fold[n_fft // 2] = cep[n_fft // 2]
    h = np.fft.irfft(np.exp(np.fft.rfft(fold)), n=n_fft)[:n_taps].copy()

    n_fade = min(taper, n_taps // 8)
    if n_fade > 0:
        h[-n_fade:] *= 0.5 * (1 + np.cos(np.pi * (np.arange(n_fade) + 1) / n_fade))
    return MonoSignal(h, target.sample_rate)
