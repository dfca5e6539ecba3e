"""Analysis: segmentation, leading fit, durations, trend fits, comparisons."""

import io
import math

import numpy as np
import pytest

from pulseopt import analysis
from pulseopt.analysis import (PulseMetrics, compare_losses, fit_leading_tau,
                               fit_log, fit_power, fit_regressions,
                               fwhm_durations, metrics_from_pulse,
                               read_metrics_csv, segment_phases,
                               waveform_correlation, write_metrics_csv)
from pulseopt.errors import (CsvFormatError, SegmentationError,
                             UndefinedMetricError)
from pulseopt.waveform import CoilParams, SampledPulse, VoltageLimits


def _four_phase_pulse(tau_lead=280.0, dip_A=-1000.0, t_dip=900,
                      peak_A=2500.0, t_peak=940, knee_A=400.0, t_knee=1040,
                      tau_decay=450.0, n=3001):
    """Synthetic pulse with analytically known phase boundaries."""
    t = np.arange(n, dtype=np.float64)
    cur = np.empty(n)
    lead = t <= t_dip
    cur[lead] = dip_A * np.exp((t[lead] - t_dip) / tau_lead)
    rise = (t > t_dip) & (t <= t_peak)
    cur[rise] = dip_A + (peak_A - dip_A) * (t[rise] - t_dip) / (t_peak - t_dip)
    fall = (t > t_peak) & (t <= t_knee)
    cur[fall] = peak_A + (knee_A - peak_A) * (t[fall] - t_peak) / (t_knee - t_peak)
    decay = t > t_knee
    cur[decay] = knee_A * np.exp(-(t[decay] - t_knee) / tau_decay)
    return SampledPulse.from_current(cur, CoilParams(), 1.0)


class TestSegmentation:
    def test_four_phase_boundaries(self):
        p = _four_phase_pulse()
        b = segment_phases(p)
        assert not b.degenerate_leading
        assert abs(b.lead_end - 900) <= 2
        assert abs(b.rise_end - 940) <= 2
        assert abs(b.fall_end - 1040) <= 2

    def test_degenerate_leading(self):
        t = np.arange(3001, dtype=np.float64)
        cur = np.clip(np.minimum(t / 100.0, (400.0 - t) / 300.0), 0.0, 1.0)
        p = SampledPulse.from_current(1000.0 * cur, CoilParams(), 1.0)
        b = segment_phases(p)
        assert b.degenerate_leading and b.lead_end == 0

    def test_no_positive_peak(self):
        cur = -np.sin(np.linspace(0, math.pi, 500))
        with pytest.raises(SegmentationError):
            segment_phases(SampledPulse.from_current(cur, dt_us=1.0))

    def test_peak_at_edge(self):
        cur = np.linspace(0.0, 100.0, 500)
        with pytest.raises(SegmentationError):
            segment_phases(SampledPulse.from_current(cur, dt_us=1.0))


class TestLeadingFit:
    def test_recovers_tau(self):
        p = _four_phase_pulse(tau_lead=280.0)
        tau, r2, t_init = fit_leading_tau(p)
        assert tau == pytest.approx(280.0, rel=0.01)
        assert r2 > 0.999
        assert t_init == pytest.approx(900.0, abs=2.0)

    def test_degenerate_raises(self):
        t = np.arange(2001, dtype=np.float64)
        cur = 1000.0 * np.clip(np.minimum(t / 100.0, (400.0 - t) / 300.0),
                               0.0, 1.0)
        p = SampledPulse.from_current(cur, CoilParams(), 1.0)
        with pytest.raises(UndefinedMetricError):
            fit_leading_tau(p)


class TestDurations:
    def test_half_sine_fwhm(self):
        # half-sine lobes: above half max for 2/3 of each base width
        j = np.arange(3000, dtype=np.float64) + 0.5     # interval midpoints
        didt = np.zeros(3000)
        didt[:200] = 0.1 * np.sin(math.pi * j[:200] / 200.0)
        didt[200:500] = -(2.0 / 30.0) * np.sin(math.pi * (j[200:500] - 200.0)
                                               / 300.0)
        cur = np.concatenate([[0.0], np.cumsum(didt)])
        p = SampledPulse.from_current(cur, CoilParams(), 1.0)
        t_rise, t_fall = fwhm_durations(p)
        assert t_rise == pytest.approx(134.0, abs=2.0)
        assert t_fall == pytest.approx(200.0, abs=2.0)

    def test_four_phase_durations(self):
        p = _four_phase_pulse()
        t_rise, t_fall = fwhm_durations(p)
        assert t_rise == pytest.approx(40.0, abs=2.0)
        assert t_fall == pytest.approx(100.0, abs=3.0)

    def test_rectangular_voltage_exact(self):
        # +2000 V for 40 us then -100 V for 800 us, L = 10 uH
        didt = np.zeros(3000)
        didt[:40] = 200.0                               # A/us
        didt[40:840] = -10.0
        cur = np.concatenate([[0.0], np.cumsum(didt)])
        p = SampledPulse.from_current(cur, CoilParams(), 1.0)
        t_rise, t_fall = fwhm_durations(p)
        assert t_rise == 40.0
        assert t_fall == 800.0

    def test_zero_negative_lobe(self):
        didt = np.zeros(3000)
        didt[:40] = 200.0
        cur = np.concatenate([[0.0], np.cumsum(didt)])
        p = SampledPulse.from_current(cur, CoilParams(), 1.0)
        t_rise, t_fall = fwhm_durations(p)
        assert t_fall == 0.0
        assert t_rise == 40.0


class TestMetrics:
    def test_full_row(self):
        lim = VoltageLimits(1000.0, -250.0)
        p = _four_phase_pulse()
        m = metrics_from_pulse(p, lim)
        assert m.v_limit_max_V == 1000.0
        assert m.r_v == pytest.approx(
            float(np.max(p.voltage) / -np.min(p.voltage)), rel=1e-12)
        assert m.i_hat_max_A == pytest.approx(2500.0, rel=1e-6)
        assert m.tau_init_us == pytest.approx(280.0, rel=0.01)
        assert m.energy_J > 0

    def test_metrics_csv_roundtrip(self):
        m = metrics_from_pulse(_four_phase_pulse(),
                               VoltageLimits(1000.0, -250.0))
        buf = io.StringIO()
        write_metrics_csv(buf, [m, m])
        buf.seek(0)
        rows = read_metrics_csv(buf)
        assert len(rows) == 2
        assert rows[0] == m

    def test_metrics_csv_header_check(self):
        with pytest.raises(CsvFormatError):
            read_metrics_csv(io.StringIO("a,b,c\n1,2,3\n"))


def _metrics_row(**kw):
    base = {f: math.nan for f in analysis.METRICS_FIELDS}
    base.update(kw)
    return PulseMetrics(**base)


class TestTrendFits:
    def test_power_fit_exact(self):
        x = np.array([1.0, 2.0, 5.0, 10.0, 20.0, 40.0])
        y = 3.0 * x ** -1.5
        fit = fit_power(x, y)
        assert fit.a == pytest.approx(3.0, rel=1e-10)
        assert fit.b == pytest.approx(-1.5, rel=1e-10)
        assert fit.r2 == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(fit.predict(x), y, rtol=1e-10)

    def test_log_fit_exact(self):
        x = np.array([0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
        y = 2.0 + 0.5 * np.log(x)
        fit = fit_log(x, y)
        assert fit.a == pytest.approx(2.0, rel=1e-10)
        assert fit.b == pytest.approx(0.5, rel=1e-10)
        assert fit.r2 == pytest.approx(1.0, abs=1e-10)

    def test_too_few_points(self):
        with pytest.raises(UndefinedMetricError):
            fit_power([1.0, 2.0], [1.0, 2.0])

    def test_named_regressions(self):
        rows = []
        for d in (0.1, 0.2, 0.4, 0.8, 1.6, 3.2):           # t_pulse in ms
            rows.append(_metrics_row(
                t_pulse_us=d * 1000.0,
                energy_J=1.0 - 0.3 * math.log(d),
                t_rise_us=50.0 * (d / 0.1) ** 0.4,
                v_hat_max_V=2000.0 * (d / 0.1) ** -0.7,
                v_hat_min_V=-500.0 * (d / 0.1) ** -0.2,
                t_fall_us=80.0 * (d / 0.1) ** 0.3,
                i_hat_max_A=3000.0 * d ** -0.5,
                i_hat_min_A=-400.0 * d ** -0.25,
                r_i=7.5 * d ** -0.25))
        fits = fit_regressions(rows)
        assert fits["energy_vs_duration"].kind == "log"
        assert fits["energy_vs_duration"].b == pytest.approx(-0.3, rel=1e-9)
        assert fits["i_hat_max_vs_duration"].b == pytest.approx(-0.5,
                                                                rel=1e-9)
        assert fits["r_i_vs_duration"].r2 == pytest.approx(1.0, abs=1e-10)
        # t_rise vs peak voltage: substitute the duration power laws
        assert fits["t_rise_vs_v_hat_max"].r2 == pytest.approx(1.0,
                                                               abs=1e-10)
        assert fits["t_rise_vs_v_hat_max"].b < 0

    def test_missing_columns_yield_none(self):
        rows = [_metrics_row(t_pulse_us=100.0 * (k + 1)) for k in range(6)]
        fits = fit_regressions(rows)
        assert fits["energy_vs_duration"] is None


class TestComparisons:
    def test_peak_matched_formula(self):
        a = _four_phase_pulse()
        b = _four_phase_pulse(peak_A=1500.0, t_peak=960)
        from pulseopt.waveform import energy_loss
        eta = compare_losses(a, b, mode="peak")
        sa = 1.0 / float(np.max(a.voltage))
        sb = 1.0 / float(np.max(b.voltage))
        want = (sa * sa * energy_loss(a) - sb * sb * energy_loss(b)) \
            / (sb * sb * energy_loss(b)) * 100.0
        assert eta == pytest.approx(want, rel=1e-12)

    def test_threshold_matched_sign(self):
        # a pulse re-scaled so both are the same shape must give eta == 0
        a = _four_phase_pulse()
        b = a.scaled(2.0)
        eta = compare_losses(a, b, mode="threshold")
        assert abs(eta) < 1.0     # titration tolerance in energy is ~2x rel

    def test_unknown_mode(self):
        a = _four_phase_pulse()
        with pytest.raises(UndefinedMetricError):
            compare_losses(a, a, mode="area")

    def test_correlation(self):
        a = _four_phase_pulse()
        assert waveform_correlation(a, a) == pytest.approx(1.0, abs=1e-12)
        flipped = SampledPulse.from_current(-a.current, a.coil, a.dt_us)
        assert waveform_correlation(a, flipped) == pytest.approx(-1.0,
                                                                 abs=1e-12)
