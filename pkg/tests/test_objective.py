"""Cost model: penalty integral, smooth margin, feasibility verdicts."""

import math

import numpy as np
import pytest

from pulseopt import neuron
from pulseopt.objective import (CostBreakdown, ObjectiveConfig,
                                activation_constraint, cost, cost_of_pulse,
                                penalty_integral, smooth_margin_slack,
                                smooth_peak)
from pulseopt.waveform import (CoilParams, SampledPulse, SplineWaveform,
                               VoltageLimits, sample)


@pytest.fixture(scope="module")
def cfg():
    return ObjectiveConfig(limits=VoltageLimits(2000.0, -250.0))


def _ramp_pulse(slopes_A_us, dur_us_each):
    """Piecewise linear current from interval slopes, closed back to zero."""
    cur = [0.0]
    for s, d in zip(slopes_A_us, dur_us_each):
        for _ in range(int(d)):
            cur.append(cur[-1] + s)
    drop = cur[-1] / 200.0
    for _ in range(200):
        cur.append(cur[-1] - drop)
    cur[-1] = 0.0
    return SampledPulse.from_current(np.array(cur), CoilParams(), 1.0)


class TestPenalty:
    def test_zero_inside_limits(self, cfg):
        p = _ramp_pulse([100.0], [50])        # 1000 V for 50 us
        assert penalty_integral(p, cfg.limits) == 0.0

    def test_two_branch_overshoot_exact(self):
        lim = VoltageLimits(1000.0, -500.0)
        # 1200 V for 10 us (over by 200) then -40 A/us for 5 us (under by
        # -400+500... none) plus a -60 A/us stretch (-600 V, under by 100)
        cur = [0.0]
        for _ in range(10):
            cur.append(cur[-1] + 120.0)       # +1200 V
        for _ in range(12):
            cur.append(cur[-1] - 60.0)        # -600 V
        for _ in range(48):
            cur.append(cur[-1] - 10.0)        # -100 V, inside
        cur[-1] = 0.0
        p = SampledPulse.from_current(np.array(cur), CoilParams(), 1.0)
        want = (200.0 * 10 + 100.0 * 12) * 1e-6
        assert penalty_integral(p, lim) == pytest.approx(want, rel=1e-12)

    def test_quadratic_contribution(self, cfg):
        p = _ramp_pulse([250.0], [20])        # 2500 V: over by 500 for 20 us
        cb = cost_of_pulse(p, cfg)
        assert cb.penalty_Vs == pytest.approx(500.0 * 20 * 1e-6, rel=1e-12)
        assert cb.penalty_J == pytest.approx(cfg.lam_S_per_s
                                             * cb.penalty_Vs ** 2, rel=1e-12)
        assert cb.total_J == pytest.approx(cb.energy_J + cb.penalty_J,
                                           rel=1e-12)
        assert not cb.feasible


class TestSmoothMargin:
    def test_lse_bounds_peak(self):
        v = np.array([-80.0, -20.0, 15.0, -60.0])
        beta = 2.0
        lse = smooth_peak(v, beta)
        assert 15.0 <= lse <= 15.0 + smooth_margin_slack(v.shape[0], beta)
        # near-ties push the softmax strictly above the true peak
        v2 = np.array([14.0, 15.0, 14.5])
        lse2 = smooth_peak(v2, beta)
        assert 15.0 < lse2 <= 15.0 + smooth_margin_slack(3, beta)

    def test_positive_margin_implies_activation(self, cfg):
        # drive hard enough for a comfortable spike
        t = np.linspace(0.0, 1.0, 41)
        w = SplineWaveform(3000.0 * np.sin(math.pi * t) ** 4
                           * np.sign(np.sin(2 * math.pi * t)), 3.0)
        g = activation_constraint(w, cfg)
        cb = cost(w, cfg)
        if g > 0:
            assert cb.margin_mV > 0

    def test_margin_consistent_with_trace(self, cfg):
        t = np.linspace(0.0, 1.0, 41)
        w = SplineWaveform(2500.0 * np.sin(2 * math.pi * t), 3.0)
        pulse = sample(w, cfg.coil)
        tr = neuron.simulate(pulse.efield, cfg.neuron_params,
                             tail_us=cfg.tail_us)
        lse = smooth_peak(tr.v_m, cfg.softmax_beta)
        slack = smooth_margin_slack(tr.v_m.shape[0], cfg.softmax_beta)
        assert activation_constraint(w, cfg) == pytest.approx(
            lse - cfg.v_threshold_mV - slack, rel=1e-12)


class TestCost:
    def test_lambda_zero_removes_penalty(self):
        cfg0 = ObjectiveConfig(limits=VoltageLimits(1.0, -1.0),
                               lam_S_per_s=0.0)
        p = _ramp_pulse([100.0], [50])
        cb = cost_of_pulse(p, cfg0)
        assert cb.penalty_Vs > 0
        assert cb.penalty_J == 0.0
        assert cb.total_J == cb.energy_J

    def test_feasible_needs_both(self, cfg):
        # weak in-limit pulse: no penalty but no spike either
        p = _ramp_pulse([1.0], [50])
        cb = cost_of_pulse(p, cfg)
        assert cb.penalty_Vs == 0.0
        assert not cb.feasible

    def test_breakdown_fields(self, cfg):
        t = np.linspace(0.0, 1.0, 41)
        w = SplineWaveform(1000.0 * np.sin(2 * math.pi * t), 3.0)
        cb = cost(w, cfg)
        assert isinstance(cb, CostBreakdown)
        assert cb.energy_J > 0
        assert math.isfinite(cb.margin_mV)

    def test_validation(self):
        with pytest.raises(Exception):
            ObjectiveConfig(limits=VoltageLimits(1.0, -1.0),
                            lam_S_per_s=-1.0)
