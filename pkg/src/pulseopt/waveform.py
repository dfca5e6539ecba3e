"""Spline-parametrised coil-current waveforms and derived pulse traces.

A waveform is a natural cubic spline through uniformly spaced current
knots over a fixed time window, with both endpoint knots clamped to zero
so every pulse starts and ends at zero coil current. Sampling a waveform
yields the dense current trace plus the coil voltage and induced electric
field, both obtained from the discrete current differences:

    V[j] = L * (I[j+1] - I[j]) / dt        (uH * A/us = V)
    E[j] = k_E * (I[j+1] - I[j]) / dt      ((V/m per A/us) * A/us)

Voltage and field therefore have one sample fewer than the current and
refer to the interval starting at their time stamp.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import CsvFormatError, InvalidDofError, InvalidWaveformError

DT_US = 1.0                # sampling step of dense pulse traces (us)
DEFAULT_WINDOW_MS = 3.0    # optimisation time window (ms)
MIN_DOF = 4                # fewer knots cannot represent a two-lobe pulse

CSV_FIELDS = ("time_us", "current_A", "voltage_V", "efield_Vpm")


@dataclass(frozen=True)
class CoilParams:
    """Lumped coil model: series inductance and resistance plus the
    linear map from coil-current rate of change to the induced electric
    field at the target."""

    inductance_uH: float = 10.0
    resistance_mohm: float = 10.0
    field_map: float = 1.0      # |k_E|, (V/m) per (A/us)

    def __post_init__(self):
        for name in ("inductance_uH", "resistance_mohm", "field_map"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidWaveformError(
                    f"coil parameter {name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class VoltageLimits:
    """Asymmetric coil voltage bounds; v_max > 0 > v_min."""

    v_max: float
    v_min: float

    def __post_init__(self):
        if math.isnan(self.v_max) or math.isnan(self.v_min):
            raise InvalidWaveformError("voltage limits must not be NaN")
        if not (self.v_max > 0.0 > self.v_min):
            raise InvalidWaveformError(
                f"need v_max > 0 > v_min, got ({self.v_max}, {self.v_min})")

    @property
    def ratio(self) -> float:
        """Limit asymmetry |v_max / v_min|."""
        return abs(self.v_max / self.v_min)


@dataclass(frozen=True)
class SplineWaveform:
    """Current waveform defined by spline knots (A) over the window.

    Endpoint knots must be zero; values within 1e-9 of the knot scale are
    snapped to exactly zero, anything larger is rejected.
    """

    knots: np.ndarray
    window_ms: float = DEFAULT_WINDOW_MS

    def __post_init__(self):
        k = np.array(self.knots, dtype=np.float64)
        if k.ndim != 1:
            raise InvalidWaveformError("knots must be one-dimensional")
        if k.shape[0] < MIN_DOF:
            raise InvalidDofError(
                f"waveform needs >= {MIN_DOF} knots, got {k.shape[0]}")
        if not np.all(np.isfinite(k)):
            raise InvalidWaveformError("knots must be finite")
        if not (math.isfinite(self.window_ms) and self.window_ms > 0):
            raise InvalidWaveformError(
                f"window_ms must be finite and > 0, got {self.window_ms!r}")
        scale = max(1.0, float(np.max(np.abs(k))))
        for idx in (0, -1):
            if abs(k[idx]) > 1e-9 * scale:
                raise InvalidWaveformError(
                    f"endpoint knot {idx} must be 0, got {k[idx]!r}")
            k[idx] = 0.0
        k.flags.writeable = False
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "window_ms", float(self.window_ms))

    @property
    def n_dof(self) -> int:
        return int(self.knots.shape[0])

    @property
    def free(self) -> np.ndarray:
        """Interior knot values, the actual optimisation variables."""
        return self.knots[1:-1].copy()

    def with_free(self, values: np.ndarray) -> "SplineWaveform":
        """New waveform with the interior knots replaced."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.n_dof - 2,):
            raise InvalidDofError(
                f"expected {self.n_dof - 2} interior knots, got {values.shape}")
        k = np.zeros(self.n_dof, dtype=np.float64)
        k[1:-1] = values
        return SplineWaveform(k, self.window_ms)

    def scaled(self, alpha: float) -> "SplineWaveform":
        return SplineWaveform(self.knots * float(alpha), self.window_ms)


@dataclass(frozen=True)
class SampledPulse:
    """Dense pulse trace on a uniform grid.

    ``current`` has M samples at t = 0, dt, ..., (M-1) dt; ``voltage`` and
    ``efield`` have M - 1 interval values derived from the current
    differences.
    """

    dt_us: float
    current: np.ndarray
    voltage: np.ndarray
    efield: np.ndarray
    coil: CoilParams = field(default_factory=CoilParams)

    def __post_init__(self):
        cur = np.array(self.current, dtype=np.float64)
        if cur.ndim != 1 or cur.shape[0] < 2:
            raise InvalidWaveformError("current trace needs >= 2 samples")
        if not np.all(np.isfinite(cur)):
            raise InvalidWaveformError("current trace must be finite")
        if not (math.isfinite(self.dt_us) and self.dt_us > 0):
            raise InvalidWaveformError(f"dt_us must be > 0, got {self.dt_us!r}")
        vol = np.array(self.voltage, dtype=np.float64)
        efl = np.array(self.efield, dtype=np.float64)
        if vol.shape != (cur.shape[0] - 1,) or efl.shape != vol.shape:
            raise InvalidWaveformError(
                "voltage/efield must have one sample fewer than current")
        for a in (cur, vol, efl):
            a.flags.writeable = False
        object.__setattr__(self, "current", cur)
        object.__setattr__(self, "voltage", vol)
        object.__setattr__(self, "efield", efl)
        object.__setattr__(self, "dt_us", float(self.dt_us))

    @classmethod
    def from_current(cls, current, coil: CoilParams = None,
                     dt_us: float = DT_US) -> "SampledPulse":
        """Build a pulse from a current trace, deriving voltage and field."""
        coil = coil or CoilParams()
        current = np.asarray(current, dtype=np.float64)
        didt = np.diff(current) / dt_us                   # A/us
        return cls(dt_us=dt_us, current=current,
                   voltage=coil.inductance_uH * didt,
                   efield=coil.field_map * didt, coil=coil)

    @property
    def n_samples(self) -> int:
        return int(self.current.shape[0])

    @property
    def window_ms(self) -> float:
        return (self.n_samples - 1) * self.dt_us * 1e-3

    @property
    def times_us(self) -> np.ndarray:
        return np.arange(self.n_samples, dtype=np.float64) * self.dt_us

    def scaled(self, alpha: float) -> "SampledPulse":
        a = float(alpha)
        return SampledPulse(dt_us=self.dt_us, current=self.current * a,
                            voltage=self.voltage * a, efield=self.efield * a,
                            coil=self.coil)


def sample(w: SplineWaveform, coil: CoilParams = None) -> SampledPulse:
    """Interpolate a waveform onto the dense uniform grid.

    The grid step is DT_US; the window must be an integer number of steps.
    """
    coil = coil or CoilParams()
    n = round(w.window_ms * 1000.0 / DT_US)
    if abs(n * DT_US - w.window_ms * 1000.0) > 1e-9:
        raise InvalidWaveformError(
            f"window {w.window_ms} ms is not a multiple of {DT_US} us")
    cur = _backend.spline_sample_uniform(w.knots, n + 1)
    cur[0] = 0.0
    cur[-1] = 0.0
    return SampledPulse.from_current(cur, coil, DT_US)


def resample_dof(w: SplineWaveform, n_new: int) -> SplineWaveform:
    """Re-express a waveform with a different knot count.

    The new knots are the old spline evaluated at the new knot positions;
    endpoints are re-clamped to zero. With ``n_new == w.n_dof`` this is the
    identity.
    """
    n_new = int(n_new)
    if n_new < MIN_DOF:
        raise InvalidDofError(f"n_new must be >= {MIN_DOF}, got {n_new}")
    if n_new == w.n_dof:
        return w
    k = np.asarray(_backend.spline_sample_uniform(w.knots, n_new))
    k[0] = 0.0
    k[-1] = 0.0
    return SplineWaveform(k, w.window_ms)


def energy_loss(p: SampledPulse) -> float:
    """Ohmic coil loss R * integral(i^2 dt) in joules.

    The integral is evaluated exactly for the piecewise linear current
    interpolant: on each interval int(i^2) = h/3 (a^2 + a b + b^2).
    """
    a = p.current[:-1]
    b = p.current[1:]
    s = np.sum(a * (a + b) + b * b) * (p.dt_us / 3.0)     # A^2 us
    return p.coil.resistance_mohm * s * 1e-9


def write_waveform_csv(path_or_buf, p: SampledPulse, derived: bool = True):
    """Write a pulse trace as CSV.

    Columns are time_us and current_A, plus voltage_V and efield_Vpm when
    ``derived`` is on. Interval quantities are written on the row of their
    left sample; the final row repeats zero for them. Values use repr-style
    formatting so a round trip is bit exact.
    """
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    f = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        wr = csv.writer(f)
        wr.writerow(CSV_FIELDS if derived else CSV_FIELDS[:2])
        t = p.times_us
        for j in range(p.n_samples):
            row = [f"{t[j]:.10g}", repr(float(p.current[j]))]
            if derived:
                v = float(p.voltage[j]) if j < p.n_samples - 1 else 0.0
                e = float(p.efield[j]) if j < p.n_samples - 1 else 0.0
                row += [repr(v), repr(e)]
            wr.writerow(row)
    finally:
        if own:
            f.close()


def read_waveform_csv(path_or_buf, coil: CoilParams = None) -> SampledPulse:
    """Read a pulse trace written by :func:`write_waveform_csv`.

    Only time_us and current_A are trusted; voltage and field are derived
    again so the pulse is always self-consistent. The time column must be
    uniform.
    """
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    f = open(path_or_buf, "r", newline="") if own else path_or_buf
    try:
        rd = csv.reader(f)
        try:
            header = next(rd)
        except StopIteration:
            raise CsvFormatError("empty waveform CSV") from None
        header = [h.strip() for h in header]
        if header[:2] != list(CSV_FIELDS[:2]):
            raise CsvFormatError(
                f"expected columns {CSV_FIELDS[:2]}, got {header[:2]}")
        times, cur = [], []
        for row in rd:
            if not row or not "".join(row).strip():
                continue
            try:
                times.append(float(row[0]))
                cur.append(float(row[1]))
            except (ValueError, IndexError):
                raise CsvFormatError(f"bad waveform row: {row!r}") from None
    finally:
        if own:
            f.close()
    if len(cur) < 2:
        raise CsvFormatError("waveform CSV needs >= 2 rows")
    times = np.asarray(times)
    steps = np.diff(times)
    dt = steps[0]
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-6 * max(dt, 1.0):
        raise CsvFormatError("time_us column must be uniformly spaced")
    return SampledPulse.from_current(np.asarray(cur), coil, float(dt))


def csv_string(p: SampledPulse, derived: bool = True) -> str:
    buf = io.StringIO()
    write_waveform_csv(buf, p, derived=derived)
    return buf.getvalue()
