"""Waveform analysis: phase segmentation, shape metrics, trend fits and
energy-loss comparisons between pulse families.

Optimised pulses share a four-phase structure: a slow negative leading
dip, a fast rise to the positive current peak, a fall, and a slow decay
back to zero. Segmentation works on the current extrema and on the coil
voltage: the fall ends where the voltage first recovers to half of its
most negative value.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.optimize import least_squares

from . import neuron
from .errors import CsvFormatError, SegmentationError, UndefinedMetricError
from .waveform import SampledPulse, VoltageLimits, energy_loss


@dataclass(frozen=True)
class PhaseBoundaries:
    """Sample indices splitting a pulse into its four phases.

    Phases: leading [0, lead_end], rising [lead_end, rise_end], falling
    [rise_end, fall_end], decay [fall_end, end]. ``degenerate_leading``
    marks pulses with no negative dip before the peak (lead_end == 0).
    """

    lead_end: int
    rise_end: int
    fall_end: int
    degenerate_leading: bool


@dataclass(frozen=True)
class PulseMetrics:
    """Shape and energy metrics of one pulse; NaN where undefined."""

    v_limit_max_V: float
    v_limit_min_V: float
    r_v_limit: float
    v_hat_max_V: float
    v_hat_min_V: float
    r_v: float
    i_hat_max_A: float
    i_hat_min_A: float
    r_i: float
    t_init_us: float
    tau_init_us: float
    tau_r2: float
    t_rise_us: float
    t_fall_us: float
    t_pulse_us: float
    energy_J: float


@dataclass(frozen=True)
class RegressionFit:
    """y = a * x^b (power) or y = a + b ln x (log); r2 in fit space."""

    kind: str
    a: float
    b: float
    r2: float
    n: int

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "power":
            return self.a * x ** self.b
        return self.a + self.b * np.log(x)


def segment_phases(pulse: SampledPulse) -> PhaseBoundaries:
    cur = pulse.current
    imax = int(np.argmax(cur))
    if cur[imax] <= 0.0:
        raise SegmentationError("pulse has no positive current peak")
    if imax == 0 or imax == cur.shape[0] - 1:
        raise SegmentationError("current peak sits at the window edge")
    imin = int(np.argmin(cur[:imax + 1]))
    scale = float(np.max(np.abs(cur)))
    degenerate = cur[imin] >= -1e-6 * scale
    lead_end = 0 if degenerate else imin

    v = pulse.voltage
    post = v[imax:]
    v_min = float(np.min(post))
    if v_min >= 0.0:
        raise SegmentationError("no falling phase after the current peak")
    j0 = imax + int(np.argmin(post))
    after = v[j0:]
    rec = np.nonzero(after >= 0.5 * v_min)[0]
    fall_end = j0 + int(rec[0]) if rec.size else cur.shape[0] - 1
    return PhaseBoundaries(lead_end=lead_end, rise_end=imax,
                           fall_end=fall_end, degenerate_leading=degenerate)


def fit_leading_tau(pulse: SampledPulse,
                    bounds: PhaseBoundaries = None) -> tuple:
    """Exponential fit I(t) = I_min exp((t - t_init) / tau) of the leading
    phase. Returns (tau_us, r2, t_init_us)."""
    bounds = bounds or segment_phases(pulse)
    if bounds.degenerate_leading:
        raise UndefinedMetricError("no leading phase to fit")
    le = bounds.lead_end
    if le < 5:
        raise UndefinedMetricError("leading phase too short to fit")
    t = pulse.times_us[:le + 1]
    i = pulse.current[:le + 1]
    i_min = float(i[le])
    t_init = float(t[le])
    keep = np.abs(i) >= 0.02 * abs(i_min)
    if int(np.count_nonzero(keep)) < 5:
        raise UndefinedMetricError("leading phase too short to fit")
    tk, ik = t[keep], i[keep]

    # log-space slope as the start, then one-parameter fit in direct space
    x = tk - t_init
    slope = float(np.polyfit(x, np.log(np.abs(ik) / abs(i_min)), 1)[0])
    if slope <= 0:
        raise UndefinedMetricError("leading phase is not a growing dip")

    def resid(q):
        return i_min * np.exp(x * q[0]) - ik

    sol = least_squares(resid, x0=[slope], method="lm")
    tau = 1.0 / float(sol.x[0])
    ss_res = float(np.sum(sol.fun ** 2))
    ss_tot = float(np.sum((ik - np.mean(ik)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else math.nan
    return tau, r2, t_init


def fwhm_durations(pulse: SampledPulse) -> tuple:
    """Rise and fall durations as total time the coil voltage spends
    beyond half of its positive / negative extreme. Returns
    (t_rise_us, t_fall_us); a missing lobe contributes zero time."""
    v = pulse.voltage
    v_max = float(np.max(v))
    v_min = float(np.min(v))
    if v_max <= 0.0 and v_min >= 0.0:
        raise UndefinedMetricError("voltage trace is flat")
    t_rise = (float(np.count_nonzero(v >= 0.5 * v_max)) * pulse.dt_us
              if v_max > 0.0 else 0.0)
    t_fall = (float(np.count_nonzero(v <= 0.5 * v_min)) * pulse.dt_us
              if v_min < 0.0 else 0.0)
    return t_rise, t_fall


def metrics_from_pulse(pulse: SampledPulse,
                       limits: VoltageLimits = None) -> PulseMetrics:
    """All scalar metrics for one pulse; fit metrics are NaN when the
    pulse has no regular leading phase."""
    v = pulse.voltage
    cur = pulse.current
    v_max, v_min = float(np.max(v)), float(np.min(v))
    i_max, i_min = float(np.max(cur)), float(np.min(cur))
    if v_max <= 0.0:
        raise UndefinedMetricError("pulse has no positive voltage lobe")
    t_rise, t_fall = fwhm_durations(pulse)
    bounds = segment_phases(pulse)
    try:
        tau, r2, t_init = fit_leading_tau(pulse, bounds)
    except UndefinedMetricError:
        tau, r2 = math.nan, math.nan
        t_init = float(bounds.lead_end) * pulse.dt_us
    return PulseMetrics(
        v_limit_max_V=limits.v_max if limits else math.nan,
        v_limit_min_V=limits.v_min if limits else math.nan,
        r_v_limit=limits.ratio if limits else math.nan,
        v_hat_max_V=v_max, v_hat_min_V=v_min,
        r_v=abs(v_max / v_min) if v_min < 0.0 else math.nan,
        i_hat_max_A=i_max, i_hat_min_A=i_min,
        r_i=abs(i_max / i_min) if i_min < 0.0 else math.nan,
        t_init_us=t_init, tau_init_us=tau, tau_r2=r2,
        t_rise_us=t_rise, t_fall_us=t_fall, t_pulse_us=t_rise + t_fall,
        energy_J=energy_loss(pulse))


def _linfit(x: np.ndarray, y: np.ndarray) -> tuple:
    b, a = np.polyfit(x, y, 1)
    pred = a + b * x
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else math.nan
    return float(a), float(b), r2


def fit_power(x, y) -> RegressionFit:
    """Least-squares power law y = a x^b (linear fit in log-log space)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if int(np.count_nonzero(keep)) < 5:
        raise UndefinedMetricError("need >= 5 positive points for a power fit")
    a, b, r2 = _linfit(np.log(x[keep]), np.log(y[keep]))
    return RegressionFit(kind="power", a=math.exp(a), b=b, r2=r2,
                         n=int(np.count_nonzero(keep)))


def fit_log(x, y) -> RegressionFit:
    """Least-squares logarithmic trend y = a + b ln x."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0)
    if int(np.count_nonzero(keep)) < 5:
        raise UndefinedMetricError("need >= 5 points for a log fit")
    a, b, r2 = _linfit(np.log(x[keep]), y[keep])
    return RegressionFit(kind="log", a=a, b=b, r2=r2,
                         n=int(np.count_nonzero(keep)))


# named trend fits over a metrics table: (y, x, kind); durations in ms
TREND_FITS = {
    "energy_vs_duration": ("energy_J", "t_pulse_ms", "log"),
    "t_rise_vs_v_hat_max": ("t_rise_us", "v_hat_max_V", "power"),
    "t_fall_vs_v_hat_min": ("t_fall_us", "abs_v_hat_min_V", "power"),
    "i_hat_max_vs_duration": ("i_hat_max_A", "t_pulse_ms", "power"),
    "i_hat_min_vs_duration": ("abs_i_hat_min_A", "t_pulse_ms", "power"),
    "r_i_vs_duration": ("r_i", "t_pulse_ms", "power"),
}


def _column(rows, name):
    if name == "t_pulse_ms":
        return np.array([r.t_pulse_us * 1e-3 for r in rows])
    if name.startswith("abs_"):
        return np.abs(np.array([getattr(r, name[4:]) for r in rows]))
    return np.array([getattr(r, name) for r in rows])


def fit_regressions(rows) -> dict:
    """Standard trend fits over a pulse-metrics table.

    Returns fit name -> RegressionFit, or None where fewer than 5 valid
    points were available.
    """
    out = {}
    for name, (ycol, xcol, kind) in TREND_FITS.items():
        x = _column(rows, xcol)
        y = _column(rows, ycol)
        try:
            out[name] = fit_power(x, y) if kind == "power" else fit_log(x, y)
        except UndefinedMetricError:
            out[name] = None
    return out


def compare_losses(test: SampledPulse, ref: SampledPulse, mode: str = "peak",
                   neuron_params=None, v_threshold: float = 10.0,
                   rel_tol: float = 1e-3, tail_us: float = 2000.0,
                   substeps: int = 1) -> float:
    """Relative energy difference of two pulses in percent.

    ``peak`` mode rescales both pulses to a common peak coil voltage
    before comparing losses; ``threshold`` mode rescales both to their
    activation threshold. Negative values mean the test pulse loses less
    energy than the reference.
    """
    if mode == "peak":
        s_t = float(np.max(test.voltage))
        s_r = float(np.max(ref.voltage))
        if s_t <= 0 or s_r <= 0:
            raise UndefinedMetricError("peak matching needs positive peaks")
        s_t, s_r = 1.0 / s_t, 1.0 / s_r
    elif mode == "threshold":
        s_t = neuron.titrate_efield(test.efield, neuron_params,
                                    dt_us=test.dt_us, tail_us=tail_us,
                                    substeps=substeps,
                                    v_threshold=v_threshold, rel_tol=rel_tol)
        s_r = neuron.titrate_efield(ref.efield, neuron_params,
                                    dt_us=ref.dt_us, tail_us=tail_us,
                                    substeps=substeps,
                                    v_threshold=v_threshold, rel_tol=rel_tol)
    else:
        raise UndefinedMetricError(f"unknown comparison mode {mode!r}")
    w_t = s_t * s_t * energy_loss(test)
    w_r = s_r * s_r * energy_loss(ref)
    if w_r == 0.0:
        raise UndefinedMetricError("reference pulse has zero energy")
    return (w_t - w_r) / w_r * 100.0


def waveform_correlation(a: SampledPulse, b: SampledPulse) -> float:
    """Pearson correlation of two current traces (resampled if needed)."""
    ca, cb = a.current, b.current
    if ca.shape != cb.shape:
        cb = np.interp(a.times_us, b.times_us, cb)
    if float(np.std(ca)) == 0.0 or float(np.std(cb)) == 0.0:
        raise UndefinedMetricError("constant trace has no correlation")
    return float(np.corrcoef(ca, cb)[0, 1])


METRICS_FIELDS = tuple(f.name for f in fields(PulseMetrics))


def write_metrics_csv(path_or_buf, rows):
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(
        path_or_buf, "__fspath__")
    f = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        wr = csv.writer(f)
        wr.writerow(METRICS_FIELDS)
        for r in rows:
            wr.writerow([repr(float(getattr(r, name)))
                         for name in METRICS_FIELDS])
    finally:
        if own:
            f.close()


def read_metrics_csv(path_or_buf):
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(
        path_or_buf, "__fspath__")
    f = open(path_or_buf, "r", newline="") if own else path_or_buf
    try:
        rd = csv.reader(f)
        try:
            header = next(rd)
        except StopIteration:
            raise CsvFormatError("empty metrics CSV") from None
        if tuple(h.strip() for h in header) != METRICS_FIELDS:
            raise CsvFormatError("metrics CSV header mismatch")
        rows = []
        for row in rd:
            if not row or not "".join(row).strip():
                continue
            try:
                rows.append(PulseMetrics(*[float(v) for v in row]))
            except (TypeError, ValueError):
                raise CsvFormatError(f"bad metrics row: {row!r}") from None
        return rows
    finally:
        if own:
            f.close()
