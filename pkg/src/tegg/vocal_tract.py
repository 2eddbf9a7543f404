"""Stage one: average vocal-tract magnitude over voiced frames, then realize it
as a minimum-phase impulse response at the output rate."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFrameError, NoVoicedFramesError, UnstableFilterError
from .lpc import LpcEstimate, gfm_iaif
from .signal_io import MonoSignal, interpolate_impulse_response
from .spectral import FrameSpec, MagnitudeResponse, evaluate_all_pole_response, frame_signal, min_phase_fir

DEFAULT_GRID = 4096
DEFAULT_TAPS = 2048


@dataclass(frozen=True)
class FrameResponses:
    magnitudes: np.ndarray  # (frames_used, grid_size // 2 + 1)
    estimates: list
    frames_skipped: int
    grid_size: int
    sample_rate: int


@dataclass(frozen=True)
class AvgVocalTract:
    mean_magnitude: MagnitudeResponse
    impulse_response: MonoSignal
    fir: MonoSignal  # minimum-phase FIR at the LPC rate, before interpolation
    frames_used: int
    frames_skipped: int


def frame_responses(voiced_speech: MonoSignal, spec: FrameSpec,
                    grid_size: int = DEFAULT_GRID, **lpc_kwargs) -> FrameResponses:
    """|1/A_v| on the grid for every frame GFM-IAIF can analyze."""
    frames = frame_signal(voiced_speech, spec, apply_window=False)
    mags, estimates, skipped = [], [], 0
    for frame in frames:
        try:
            est: LpcEstimate = gfm_iaif(frame, voiced_speech.sample_rate, **lpc_kwargs)
            h = evaluate_all_pole_response(est.a_v, grid_size)
        except (DegenerateFrameError, UnstableFilterError):
            skipped += 1
            continue
        mags.append(np.abs(h))
        estimates.append(est)
    mags = np.array(mags).reshape(len(mags), grid_size // 2 + 1)
    return FrameResponses(mags, estimates, skipped, grid_size, voiced_speech.sample_rate)


def mean_magnitude(magnitudes: np.ndarray) -> np.ndarray:
    """Arithmetic mean of linear magnitudes over frames (axis 0).

    Columns are sorted before summing, so the result does not depend on
    frame order at all.
    """
    if magnitudes.shape[0] == 0:
        raise NoVoicedFramesError("no frames could be analyzed")
    return np.sort(magnitudes, axis=0).sum(axis=0) / magnitudes.shape[0]


def average_vocal_tract(voiced_speech: MonoSignal, spec: FrameSpec,
                        grid_size: int = DEFAULT_GRID, **lpc_kwargs) -> MagnitudeResponse:
    resp = frame_responses(voiced_speech, spec, grid_size, **lpc_kwargs)
    if resp.magnitudes.shape[0] == 0:
        raise NoVoicedFramesError(f"no valid frames ({resp.frames_skipped} skipped)")
    return MagnitudeResponse(
        mean_magnitude(resp.magnitudes), grid_size, voiced_speech.sample_rate,
        meta={"frames_used": resp.magnitudes.shape[0], "frames_skipped": resp.frames_skipped},
    )


def _realize(mean: MagnitudeResponse, n_taps: int,
             output_rate: int | None) -> tuple[MonoSignal, MonoSignal]:
    fir = min_phase_fir(mean, n_taps)
    output_rate = mean.sample_rate if output_rate is None else int(output_rate)
    if output_rate == mean.sample_rate:
        return fir, fir
    if output_rate % mean.sample_rate:
        raise ValueError(f"output rate {output_rate} is not a multiple of {mean.sample_rate}")
    factor = output_rate // mean.sample_rate
    # interpolation keeps waveform level; dividing by the factor keeps |H| instead
    h = interpolate_impulse_response(fir, factor)
    return h.with_samples(h.samples / factor), fir


def build_impulse_response(mean: MagnitudeResponse, n_taps: int = DEFAULT_TAPS,
                           output_rate: int | None = None) -> MonoSignal:
    """Minimum-phase FIR for ``mean``, interpolated up to ``output_rate``."""
    return _realize(mean, n_taps, output_rate)[0]


def estimate_vocal_tract(voiced_speech: MonoSignal, spec: FrameSpec, output_rate: int,
                         grid_size: int = DEFAULT_GRID, n_taps: int = DEFAULT_TAPS) -> AvgVocalTract:
    mean = average_vocal_tract(voiced_speech, spec, grid_size)
    h, fir = _realize(mean, n_taps, output_rate)
    return AvgVocalTract(mean, h, fir, mean.meta["frames_used"], mean.meta["frames_skipped"])
