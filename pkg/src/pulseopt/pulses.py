"""Synthesis of conventional reference pulse shapes.

Three families are supported, all returning zero-to-zero current traces
on the standard dense grid:

* ``monophasic``: quarter-sine current rise followed by an exponential
  decay, shifted so the current reaches exactly zero at the window end.
  The decay constant is solved from the requested voltage asymmetry
  |V_max / V_min|.
* ``biphasic``: one full sine period of current, cosine-shaped voltage.
* ``rectangular``: two-level voltage rectangle (triangular current) with
  the negative-level duration chosen for exact volt-second balance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParamsError, WindowOverflowError
from .waveform import DT_US, CoilParams, SampledPulse

KINDS = ("monophasic", "biphasic", "rectangular")


@dataclass(frozen=True)
class ReferencePulseSpec:
    """Parameters of a synthetic reference pulse.

    Only the fields for the chosen ``kind`` are used: ``rise_us`` and
    ``voltage_ratio`` for monophasic, ``period_us`` for biphasic,
    ``t_pos_us`` with the two voltage levels for rectangular.
    """

    kind: str
    amplitude_A: float = 1.0
    window_ms: float = 3.0
    rise_us: float = 82.0
    voltage_ratio: float = 3.3
    period_us: float = 300.0
    t_pos_us: float = 60.0
    level_pos_V: float = 1000.0
    level_neg_V: float = -500.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParamsError(f"unknown pulse kind {self.kind!r}")
        if not (self.amplitude_A > 0 and math.isfinite(self.amplitude_A)):
            raise InvalidParamsError("amplitude_A must be > 0")
        if self.window_ms <= 0:
            raise InvalidParamsError("window_ms must be > 0")


def _grid(window_ms: float):
    n = round(window_ms * 1000.0 / DT_US)
    if abs(n * DT_US - window_ms * 1000.0) > 1e-9:
        raise InvalidParamsError(
            f"window {window_ms} ms is not a multiple of {DT_US} us")
    return np.arange(n + 1, dtype=np.float64) * DT_US


def _monophasic(spec: ReferencePulseSpec, t: np.ndarray) -> np.ndarray:
    t_r = spec.rise_us
    t_end = t[-1]
    if not 0 < t_r < t_end:
        raise WindowOverflowError("monophasic rise does not fit the window")
    if spec.voltage_ratio <= 0:
        raise InvalidParamsError("voltage_ratio must be > 0")
    # Peak voltages: L I pi / (2 t_r) at onset, -L I / (tau (1 - c)) at the
    # start of the decay, c = exp(-(T - t_r) / tau). Solve
    # tau (1 - c) = 2 t_r ratio / pi for tau by fixed-point iteration.
    k = 2.0 * t_r * spec.voltage_ratio / math.pi
    tau = k
    for _ in range(60):
        tau_next = k / (1.0 - math.exp(-(t_end - t_r) / tau))
        if abs(tau_next - tau) < 1e-12 * tau:
            tau = tau_next
            break
        tau = tau_next
    if tau >= t_end - t_r:
        raise WindowOverflowError("monophasic decay does not fit the window")
    c = math.exp(-(t_end - t_r) / tau)
    cur = np.where(
        t <= t_r,
        np.sin(0.5 * math.pi * t / t_r),
        (np.exp(-(t - t_r) / tau) - c) / (1.0 - c))
    return spec.amplitude_A * cur


def _biphasic(spec: ReferencePulseSpec, t: np.ndarray) -> np.ndarray:
    if not 0 < spec.period_us <= t[-1]:
        raise WindowOverflowError("biphasic period does not fit the window")
    cur = np.where(t <= spec.period_us,
                   np.sin(2.0 * math.pi * t / spec.period_us), 0.0)
    cur[-1] = 0.0
    return spec.amplitude_A * cur


def _rectangular(spec: ReferencePulseSpec, t: np.ndarray,
                 coil: CoilParams) -> np.ndarray:
    vp, vn = spec.level_pos_V, spec.level_neg_V
    if not (vp > 0 > vn):
        raise InvalidParamsError("need level_pos_V > 0 > level_neg_V")
    t_p = spec.t_pos_us
    if t_p <= 0:
        raise InvalidParamsError("t_pos_us must be > 0")
    t_n = vp * t_p / (-vn)          # volt-second balance
    if t_p + t_n > t[-1]:
        raise WindowOverflowError("rectangular pulse does not fit the window")
    i_peak = vp * t_p / coil.inductance_uH       # A
    up = t / t_p
    down = (t_p + t_n - t) / t_n
    cur = i_peak * np.clip(np.minimum(up, down), 0.0, 1.0)
    cur[-1] = 0.0
    return cur


def synthesize(spec: ReferencePulseSpec,
               coil: CoilParams = None) -> SampledPulse:
    """Sample a reference pulse on the dense grid."""
    coil = coil or CoilParams()
    t = _grid(spec.window_ms)
    if spec.kind == "monophasic":
        cur = _monophasic(spec, t)
    elif spec.kind == "biphasic":
        cur = _biphasic(spec, t)
    else:
        cur = _rectangular(spec, t, coil)
    return SampledPulse.from_current(cur, coil, DT_US)
