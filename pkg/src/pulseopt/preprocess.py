"""Signal conditioning applied before waveform analysis.

Recorded or optimised current traces are smoothed with a causal
first-order Butterworth low-pass (bilinear transform with frequency
prewarp, unity DC gain) so that ripple from the spline parametrisation
or measurement noise does not corrupt peak and duration metrics.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import butter, lfilter

from .errors import InvalidCutoffError
from .waveform import SampledPulse


def butterworth_lowpass(values, fs_hz: float, cutoff_hz: float) -> np.ndarray:
    """First-order causal Butterworth low-pass of a uniformly sampled signal."""
    if not (math.isfinite(cutoff_hz) and cutoff_hz > 0):
        raise InvalidCutoffError(f"cutoff must be > 0, got {cutoff_hz!r}")
    if cutoff_hz >= fs_hz / 2:
        raise InvalidCutoffError(
            f"cutoff {cutoff_hz} Hz must be below Nyquist {fs_hz / 2} Hz")
    b, a = butter(1, cutoff_hz, btype="low", fs=fs_hz)
    return lfilter(b, a, np.asarray(values, dtype=np.float64))


def filter_pulse(pulse: SampledPulse, cutoff_hz: float = 200e3) -> SampledPulse:
    """Low-pass the current trace and re-derive voltage and field."""
    fs_hz = 1e6 / pulse.dt_us
    cur = butterworth_lowpass(pulse.current, fs_hz, cutoff_hz)
    return SampledPulse.from_current(cur, pulse.coil, pulse.dt_us)
