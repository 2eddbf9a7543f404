"""Energy-based voice activity detection on the shared analysis grid."""

from dataclasses import dataclass

import numpy as np

from .errors import NoVoicedFramesError
from .signal_io import MonoSignal
from .spectral import FrameSpec, frame_layout, frame_signal

SILENCE_DB = -200.0
# frames at or below this are digital silence and excluded from the floor
# estimate, so padding a file with zeros cannot drag the threshold down
DIGITAL_SILENCE_DB = -130.0


@dataclass(frozen=True)
class VadConfig:
    floor_percentile: float = 20.0
    margin_db: float = 9.0
    hangover_frames: int = 5
    absolute_floor_dbfs: float = -60.0

    def __post_init__(self):
        if not 0 <= self.floor_percentile <= 100:
            raise ValueError("floor_percentile must be within [0, 100]")
        if self.hangover_frames < 0:
            raise ValueError("hangover_frames must be non-negative")


@dataclass(frozen=True)
class VoiceMask:
    frame_flags: np.ndarray
    spec: FrameSpec
    signal_length: int
    frame_db: np.ndarray | None = None
    threshold_db: float | None = None

    @property
    def sample_flags(self) -> np.ndarray:
        """A sample is voiced iff at least one voiced frame covers it."""
        lay = frame_layout(self.signal_length, self.spec)
        win, hop = self.spec.win_length, self.spec.hop
        cover = np.zeros(lay.padded_length + 1, dtype=np.int64)
        starts = np.flatnonzero(self.frame_flags) * hop
        np.add.at(cover, starts, 1)
        np.add.at(cover, starts + win, -1)
        covered = np.cumsum(cover)[:lay.padded_length] > 0
        return covered[lay.pad_front:lay.pad_front + self.signal_length]

    @property
    def voiced_fraction(self) -> float:
        return float(np.mean(self.frame_flags)) if len(self.frame_flags) else 0.0

    def to_dict(self) -> dict:
        return {
            "frame_flags": [bool(v) for v in self.frame_flags],
            "hop": self.spec.hop,
            "win_length": self.spec.win_length,
            "sample_rate": self.spec.sample_rate,
            "threshold_db": self.threshold_db,
        }


def frame_energy_db(signal: MonoSignal, spec: FrameSpec) -> np.ndarray:
    """Per-frame RMS of the windowed frame, in dB re full scale.

    Normalized by the window RMS so a full-scale sine reads about -3 dBFS.
    """
    frames = frame_signal(signal, spec)
    w_rms = np.sqrt(np.mean(spec.window ** 2))
    rms = np.sqrt(np.mean(frames ** 2, axis=1)) / w_rms
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(rms)
    return np.maximum(db, SILENCE_DB)


def _apply_hangover(flags: np.ndarray, hangover: int) -> np.ndarray:
    out = flags.copy()
    last_on = -hangover - 1
    for i, f in enumerate(flags):
        if f:
            last_on = i
        elif i - last_on <= hangover:
            out[i] = True
    return out


def detect_voice(signal: MonoSignal, spec: FrameSpec, config: VadConfig = VadConfig()) -> VoiceMask:
    """Flag frames whose energy clears a percentile noise floor plus a margin.

    When no frame clears the margin above the floor (stationary input, tone or
    silence), the relative rule is meaningless; frames are then judged against
    the absolute floor instead.
    """
    db = frame_energy_db(signal, spec)
    live = db[db > DIGITAL_SILENCE_DB]
    if live.size == 0:
        flags = np.zeros(len(db), dtype=bool)
        return VoiceMask(flags, spec, len(signal), frame_db=db, threshold_db=None)
    floor = float(np.percentile(live, config.floor_percentile))
    relative = np.max(live) - floor >= config.margin_db
    threshold = floor + config.margin_db if relative else config.absolute_floor_dbfs
    flags = _apply_hangover(db > threshold, config.hangover_frames)
    return VoiceMask(flags, spec, len(signal), frame_db=db, threshold_db=threshold)


def extract_voiced(signal: MonoSignal, mask: VoiceMask) -> MonoSignal:
    if mask.signal_length != len(signal):
        raise ValueError(f"mask built for {mask.signal_length} samples, signal has {len(signal)}")
    keep = mask.sample_flags
    if not np.any(keep):
        raise NoVoicedFramesError("no voiced samples")
    return signal.with_samples(signal.samples[keep])
