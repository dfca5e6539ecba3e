"""Waveform layer: spline sampling, derived traces, energy, CSV."""

import io
import math

import numpy as np
import pytest

from pulseopt.errors import (CsvFormatError, InvalidDofError,
                             InvalidWaveformError)
from pulseopt.waveform import (CoilParams, SampledPulse, SplineWaveform,
                               VoltageLimits, csv_string, energy_loss,
                               read_waveform_csv, resample_dof, sample,
                               write_waveform_csv)


def _sine_waveform(n_knots=51, window_ms=3.0, amp=100.0):
    # one full period, so both endpoints are exactly zero
    t = np.linspace(0.0, 1.0, n_knots)
    return SplineWaveform(amp * np.sin(2.0 * math.pi * t), window_ms)


class TestSplineWaveform:
    def test_endpoints_snap_to_zero(self):
        k = np.array([1e-12, 1.0, 2.0, -1e-12])
        w = SplineWaveform(k, 1.0)
        assert w.knots[0] == 0.0 and w.knots[-1] == 0.0

    def test_nonzero_endpoint_rejected(self):
        with pytest.raises(InvalidWaveformError):
            SplineWaveform(np.array([0.5, 1.0, 2.0, 0.0]), 1.0)

    def test_too_few_knots_rejected(self):
        with pytest.raises(InvalidDofError):
            SplineWaveform(np.array([0.0, 1.0, 0.0]), 1.0)

    def test_with_free_roundtrip(self):
        w = _sine_waveform(n_knots=9)
        w2 = w.with_free(w.free)
        np.testing.assert_array_equal(w.knots, w2.knots)

    def test_with_free_wrong_length(self):
        w = _sine_waveform(n_knots=9)
        with pytest.raises(InvalidDofError):
            w.with_free(np.zeros(5))

    def test_knots_immutable(self):
        w = _sine_waveform(n_knots=9)
        with pytest.raises(ValueError):
            w.knots[1] = 5.0


class TestSampling:
    def test_sample_count_and_grid(self):
        p = sample(_sine_waveform())
        assert p.n_samples == 3001
        assert p.voltage.shape == (3000,)
        assert p.current[0] == 0.0 and p.current[-1] == 0.0

    def test_sine_voltage_matches_analytic_derivative(self):
        # V = L di/dt; compare interval midpoint values of the analytic
        # derivative against the sampled trace, away from the natural ends
        amp, window_ms = 100.0, 3.0
        w = _sine_waveform(n_knots=51, window_ms=window_ms, amp=amp)
        coil = CoilParams()
        p = sample(w, coil)
        t_mid = (p.times_us[:-1] + p.times_us[1:]) / 2.0 * 1e-3  # ms
        didt = (amp * 2.0 * math.pi / (window_ms * 1000.0)
                * np.cos(2.0 * math.pi * t_mid / window_ms))     # A/us
        v_ref = coil.inductance_uH * didt
        inner = slice(150, 2850)
        err = np.max(np.abs(p.voltage[inner] - v_ref[inner]))
        assert err < 0.01 * np.max(np.abs(v_ref))

    def test_triangle_voltage_plateaus(self):
        # triangle knots: constant-slope segments away from the corners;
        # spline overshoot must stay local
        n = 31
        t = np.linspace(0.0, 1.0, n)
        peak_at = 10
        k = np.where(t <= t[peak_at], t / t[peak_at],
                     (1.0 - t) / (1.0 - t[peak_at])) * 500.0
        k[0] = k[-1] = 0.0
        w = SplineWaveform(k, 3.0)
        p = sample(w)
        v_up = 10.0 * 500.0 / (t[peak_at] * 3000.0)   # L * slope, V
        mid = p.voltage[300:700]                       # inside the rise
        assert np.max(np.abs(mid - v_up)) < 0.05 * v_up

    def test_window_must_fit_grid(self):
        w = SplineWaveform(np.array([0.0, 1.0, 1.0, 0.0]), 0.0015005)
        with pytest.raises(InvalidWaveformError):
            sample(w)

    def test_scaled_is_linear(self):
        w = _sine_waveform(n_knots=21)
        p1 = sample(w)
        p2 = sample(w.scaled(2.5))
        np.testing.assert_allclose(p2.current, 2.5 * p1.current, rtol=1e-12)


class TestResample:
    def test_identity(self):
        w = _sine_waveform(n_knots=33)
        assert resample_dof(w, 33) is w

    def test_upsample_preserves_shape(self):
        w = _sine_waveform(n_knots=33)
        w2 = resample_dof(w, 65)
        p1, p2 = sample(w), sample(w2)
        scale = np.max(np.abs(p1.current))
        assert np.max(np.abs(p1.current - p2.current)) < 0.005 * scale

    def test_bad_dof(self):
        with pytest.raises(InvalidDofError):
            resample_dof(_sine_waveform(), 3)


class TestEnergy:
    def test_rectangle_exact(self):
        # 1 A for 1 ms at 10 mOhm: W = R I^2 T = 1e-5 J
        cur = np.ones(1001)
        cur[0] = cur[-1] = 1.0           # flat trace, no ramps
        p = SampledPulse.from_current(cur, CoilParams(), dt_us=1.0)
        assert energy_loss(p) == pytest.approx(1e-5, rel=1e-9)

    def test_triangle_exact(self):
        # symmetric triangle, peak 1 A, base 2 ms: int i^2 dt = 2/3 ms
        up = np.linspace(0.0, 1.0, 1001)
        cur = np.concatenate([up, up[::-1][1:]])
        p = SampledPulse.from_current(cur, CoilParams(), dt_us=1.0)
        assert energy_loss(p) == pytest.approx(2.0 / 3.0 * 1e-5, rel=1e-9)

    def test_quadratic_scaling(self):
        p = sample(_sine_waveform())
        w0 = energy_loss(p)
        assert energy_loss(p.scaled(3.0)) == pytest.approx(9.0 * w0,
                                                           rel=1e-12)


class TestCsv:
    def test_roundtrip_bit_exact(self):
        p = sample(_sine_waveform(n_knots=21))
        buf = io.StringIO(csv_string(p))
        q = read_waveform_csv(buf)
        np.testing.assert_array_equal(p.current, q.current)
        np.testing.assert_array_equal(p.voltage, q.voltage)
        assert q.dt_us == p.dt_us

    def test_file_roundtrip(self, tmp_path):
        p = sample(_sine_waveform(n_knots=21))
        path = tmp_path / "pulse.csv"
        write_waveform_csv(path, p)
        q = read_waveform_csv(path)
        np.testing.assert_array_equal(p.current, q.current)

    def test_derived_columns_optional(self):
        p = sample(_sine_waveform(n_knots=9))
        text = csv_string(p, derived=False)
        assert text.splitlines()[0] == "time_us,current_A"
        q = read_waveform_csv(io.StringIO(text))
        np.testing.assert_array_equal(p.current, q.current)

    def test_header_mismatch(self):
        with pytest.raises(CsvFormatError):
            read_waveform_csv(io.StringIO("a,b\n0,0\n1,1\n"))

    def test_nonuniform_grid_rejected(self):
        text = "time_us,current_A\n0,0\n1,1\n3,0\n"
        with pytest.raises(CsvFormatError):
            read_waveform_csv(io.StringIO(text))

    def test_empty_rejected(self):
        with pytest.raises(CsvFormatError):
            read_waveform_csv(io.StringIO(""))


class TestParams:
    def test_limits_validate(self):
        with pytest.raises(InvalidWaveformError):
            VoltageLimits(-1.0, -100.0)
        with pytest.raises(InvalidWaveformError):
            VoltageLimits(float("nan"), -100.0)
        assert VoltageLimits(2000.0, -250.0).ratio == pytest.approx(8.0)

    def test_coil_validates(self):
        with pytest.raises(InvalidWaveformError):
            CoilParams(inductance_uH=0.0)
