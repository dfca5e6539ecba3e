"""Reference pulse synthesis."""

import math

import numpy as np
import pytest

from pulseopt.errors import InvalidParamsError, WindowOverflowError
from pulseopt.pulses import KINDS, ReferencePulseSpec, synthesize
from pulseopt.waveform import CoilParams


class TestMonophasic:
    def test_voltage_asymmetry_matches_request(self):
        spec = ReferencePulseSpec(kind="monophasic", rise_us=82.0,
                                  voltage_ratio=3.3)
        p = synthesize(spec)
        r = float(np.max(p.voltage) / -np.min(p.voltage))
        # discrete differencing blurs the onset peak slightly
        assert r == pytest.approx(3.3, rel=0.02)

    def test_current_shape(self):
        p = synthesize(ReferencePulseSpec(kind="monophasic"))
        assert p.current[0] == 0.0
        assert abs(p.current[-1]) < 1e-12
        assert np.argmax(p.current) == pytest.approx(82, abs=1)
        assert float(np.min(p.current)) >= -1e-12    # never goes negative

    def test_rise_must_fit(self):
        with pytest.raises(WindowOverflowError):
            synthesize(ReferencePulseSpec(kind="monophasic", rise_us=4000.0))


class TestBiphasic:
    def test_full_period_and_zero_net(self):
        spec = ReferencePulseSpec(kind="biphasic", period_us=300.0)
        p = synthesize(spec)
        assert p.current[150] == pytest.approx(0.0, abs=1e-10)
        assert float(np.max(p.current)) == pytest.approx(1.0, abs=1e-4)
        assert float(np.min(p.current)) == pytest.approx(-1.0, abs=1e-4)
        assert np.all(p.current[301:] == 0.0)

    def test_period_must_fit(self):
        with pytest.raises(WindowOverflowError):
            synthesize(ReferencePulseSpec(kind="biphasic", period_us=4000.0))


class TestRectangular:
    def test_volt_second_balance_is_exact(self):
        spec = ReferencePulseSpec(kind="rectangular", t_pos_us=60.0,
                                  level_pos_V=1000.0, level_neg_V=-400.0)
        p = synthesize(spec)
        # current returns to exactly zero and stays there
        t_n = 1000.0 * 60.0 / 400.0
        end = int(60 + t_n) + 1
        assert np.all(np.abs(p.current[end:]) < 1e-9)

    def test_levels(self):
        coil = CoilParams()
        spec = ReferencePulseSpec(kind="rectangular", t_pos_us=60.0,
                                  level_pos_V=1000.0, level_neg_V=-500.0)
        p = synthesize(spec, coil)
        assert float(np.max(p.voltage)) == pytest.approx(1000.0, rel=1e-9)
        assert float(np.min(p.voltage)) == pytest.approx(-500.0, rel=1e-9)
        assert float(np.max(p.current)) == pytest.approx(
            1000.0 * 60.0 / coil.inductance_uH, rel=1e-9)

    def test_must_fit_window(self):
        with pytest.raises(WindowOverflowError):
            synthesize(ReferencePulseSpec(kind="rectangular", t_pos_us=60.0,
                                          level_pos_V=1000.0,
                                          level_neg_V=-10.0))

    def test_level_signs_checked(self):
        with pytest.raises(InvalidParamsError):
            synthesize(ReferencePulseSpec(kind="rectangular",
                                          level_pos_V=-5.0))


class TestSpecValidation:
    def test_kinds(self):
        assert set(KINDS) == {"monophasic", "biphasic", "rectangular"}
        with pytest.raises(InvalidParamsError):
            ReferencePulseSpec(kind="sawtooth")

    def test_amplitude(self):
        with pytest.raises(InvalidParamsError):
            ReferencePulseSpec(kind="biphasic", amplitude_A=0.0)
