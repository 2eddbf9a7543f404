"""tEGG: strip phonetic content from speech by driving an EGG signal through
the speaker's average vocal tract and the speech's short-time energy envelope."""

__version__ = "0.1.0"

from .cross_filter import (
    Diagnostics,
    TransformConfig,
    analyze,
    apply_ratio,
    convolve,
    cross_filter,
    energy_envelope,
    estimate_f0,
    finalize,
    modulation_ratio,
    transform,
)
from .errors import (
    ChannelCountError,
    DegenerateFrameError,
    F0EstimationError,
    NoVoicedFramesError,
    SilentEggError,
    TeggError,
    UnstableFilterError,
    UnsupportedEncodingError,
    WavFormatError,
)
from .lpc import LpcEstimate, ensure_stable, gfm_iaif, inverse_filter, lpc_autocorr
from .signal_io import MonoSignal, StereoRecording, read_recording, read_wav, write_recording, write_wav
from .spectral import FrameSpec, MagnitudeResponse, Spectrogram, istft, min_phase_fir, stft
from .vad import VadConfig, VoiceMask, detect_voice, extract_voiced
from .vocal_tract import AvgVocalTract, average_vocal_tract, build_impulse_response, estimate_vocal_tract
