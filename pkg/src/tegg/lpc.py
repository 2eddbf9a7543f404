"""Linear prediction and GFM-IAIF source/tract decomposition.

All LPC solves use the autocorrelation method (Levinson-Durbin), so every
estimate is stable by construction up to rounding; ``ensure_stable`` then
pins pole radii to at most ``gamma``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import DegenerateFrameError

DEFAULT_GAMMA = 0.998
LIP_COEF = 0.99
GLOTTAL_ORDER = 3
# lag-0 white-noise correction; relative, so coefficients stay gain invariant
NOISE_CORRECTION = 1e-9


def vocal_tract_order(sample_rate: int) -> int:
    """Vocal-tract LPC order: 2 + fs/1000 (18 at 16 kHz)."""
    return 2 + int(round(sample_rate / 1000))


def autocorrelation(x: np.ndarray, max_lag: int) -> np.ndarray:
    n = len(x)
    nfft = 1 << int(np.ceil(np.log2(2 * n - 1)))
    spec = np.fft.rfft(x, nfft)
    r = np.fft.irfft(spec.real**2 + spec.imag**2, nfft)[: max_lag + 1]
    return r / n


def levinson_durbin(r: np.ndarray, order: int) -> tuple[np.ndarray, float, np.ndarray]:
    """Solve the autocorrelation normal equations.

    Returns (a, prediction error power, reflection coefficients) with a[0] = 1.
    """
    a = np.zeros(order + 1)
    a[0] = 1.0
    k = np.zeros(order)
    err = float(r[0])
    for i in range(1, order + 1):
        acc = r[i] + np.dot(a[1:i], r[i - 1:0:-1])
        ki = -acc / err
        if not np.isfinite(ki) or abs(ki) >= 1.0:
            raise DegenerateFrameError(f"reflection coefficient {ki:.6g} at stage {i}")
        a[1:i] = a[1:i] + ki * a[i - 1:0:-1]
        a[i] = ki
        k[i - 1] = ki
        err *= 1.0 - ki * ki
        if err <= 0:
            raise DegenerateFrameError(f"prediction error vanished at stage {i}")
    return a, err, k


def lpc_autocorr(frame, order: int) -> tuple[np.ndarray, float]:
    """LPC coefficients ``a`` (a[0] = 1) and the one-step prediction error power.

    Power is per sample (autocorrelation divided by frame length).
    """
    x = np.asarray(frame, dtype=np.float64)
    if order < 0:
        raise ValueError("order must be non-negative")
    if order >= len(x):
        raise ValueError(f"order {order} must be below frame length {len(x)}")
    r = autocorrelation(x, order)
    if not r[0] > 0:
        raise DegenerateFrameError("all-zero frame")
    r = r.copy()
    r[0] *= 1.0 + NOISE_CORRECTION
    a, err, _ = levinson_durbin(r, order)
    return a, err


def inverse_filter(x, coeffs) -> np.ndarray:
    """Prediction residual e[t] = sum_k a_k x[t-k] (FIR application of A)."""
    return lfilter(np.asarray(coeffs, dtype=np.float64), [1.0], np.asarray(x, dtype=np.float64))


def ensure_stable(coeffs, gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    """Force all roots of A inside radius ``gamma``.

    Roots outside the unit circle are reflected (r -> 1/conj(r)), which keeps
    |A(e^jw)| up to a constant; any root still beyond ``gamma`` is pulled in
    radially to ``gamma``. Polynomials already inside are returned unchanged.
    """
    a = np.asarray(coeffs, dtype=np.float64)
    if a[0] != 1.0:
        raise ValueError("coeffs[0] must be 1")
    if not 0 < gamma <= 1:
        raise ValueError("gamma must be in (0, 1]")
    if a.size < 2:
        return a.copy()
    roots = np.roots(a)
    mag = np.abs(roots)
    if np.all(mag <= gamma):
        return a.copy()
    outside = mag > 1.0
    roots = np.where(outside, 1.0 / np.conj(roots), roots)
    mag = np.abs(roots)
    roots = np.where(mag > gamma, roots * (gamma / np.maximum(mag, 1e-300)), roots)
    return np.real(np.poly(roots))


@dataclass(frozen=True)
class LpcEstimate:
    a_v: np.ndarray
    a_g: np.ndarray
    a_l: np.ndarray

    @property
    def vt_order(self) -> int:
        return len(self.a_v) - 1


def gfm_iaif(frame, sample_rate: int, vt_order: int | None = None,
             glottal_order: int = GLOTTAL_ORDER, lip: float = LIP_COEF,
             gamma: float = DEFAULT_GAMMA) -> LpcEstimate:
    """Iterative adaptive inverse filtering with a glottal flow model.

    ``frame`` is raw (unwindowed) speech; a Hamming window is applied to every
    LPC solve inside. A linear ramp of ``vt_order + 1`` samples is prepended
    so inverse filtering does not start from a step.
    """
    s = np.asarray(frame, dtype=np.float64)
    if not np.any(s):
        raise DegenerateFrameError("all-zero frame")
    nv = vocal_tract_order(sample_rate) if vt_order is None else int(vt_order)
    ng = int(glottal_order)
    if len(s) <= nv:
        raise ValueError(f"frame of {len(s)} samples too short for order {nv}")

    win = np.hamming(len(s))
    n_pre = nv + 1
    x = np.concatenate([np.linspace(-s[0], s[0], n_pre), s])
    body = slice(n_pre, None)

    # lip radiation: cancel the differentiator with a leaky integrator
    a_l = np.array([1.0, -lip])
    x_gv = lfilter([1.0], a_l, x)
    s_gv = x_gv[body]

    # gross glottis: ng cascaded first-order estimates
    a_g1, _ = lpc_autocorr(s_gv * win, 1)
    for _ in range(ng - 1):
        s_v1x = lfilter(a_g1, [1.0], x_gv)[body]
        a_g1x, _ = lpc_autocorr(s_v1x * win, 1)
        a_g1 = np.convolve(a_g1, a_g1x)

    # gross vocal tract
    s_v1 = lfilter(a_g1, [1.0], x_gv)[body]
    a_v1, _ = lpc_autocorr(s_v1 * win, nv)

    # fine glottis
    s_g1 = lfilter(a_v1, [1.0], x_gv)[body]
    a_g, _ = lpc_autocorr(s_g1 * win, ng)

    # fine vocal tract
    s_v = lfilter(a_g, [1.0], x_gv)[body]
    a_v, _ = lpc_autocorr(s_v * win, nv)

    return LpcEstimate(
        a_v=ensure_stable(a_v, gamma),
        a_g=ensure_stable(a_g, gamma),
        a_l=a_l,
    )
