"""Cost model for pulse optimisation.

The scalar objective combines the ohmic coil loss with a quadratic
penalty on voltage-limit violations,

    J = W + lam * P^2
    W = R * integral(i^2 dt)                     (J)
    P = integral(U dt)                           (V s)

where U is the overshoot above v_max plus the undershoot below v_min and
zero inside the limits. ``lam`` converts squared volt-seconds to joules.
The penalty keeps the cost finite and differentiable everywhere; actual
feasibility (zero overshoot) is owned by the optimiser layer, which
treats the limits as hard constraints and reports ``penalty == 0`` for
every accepted solution.

The activation constraint is exposed both as the binary all-or-none test
and as a smooth surrogate margin based on a log-sum-exp softmax of the
membrane trace, which local solvers can difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import neuron
from .errors import InvalidParamsError
from .waveform import (CoilParams, SampledPulse, SplineWaveform,
                       VoltageLimits, energy_loss, sample)


@dataclass(frozen=True)
class ObjectiveConfig:
    """Everything the cost and constraint evaluations depend on."""

    limits: VoltageLimits
    coil: CoilParams = field(default_factory=CoilParams)
    neuron_params: neuron.NeuronParams = None
    lam_S_per_s: float = 1.0         # penalty weight (J per (V s)^2)
    v_threshold_mV: float = 10.0     # activation threshold on v_m
    softmax_beta: float = 2.0        # smooth-max sharpness (1/mV)
    tail_us: float = 2000.0          # zero-field tail after the window
    substeps: int = 1                # integrator substeps per grid step

    def __post_init__(self):
        if self.neuron_params is None:
            object.__setattr__(self, "neuron_params", neuron.default_params())
        if not (math.isfinite(self.lam_S_per_s) and self.lam_S_per_s >= 0):
            raise InvalidParamsError("lam_S_per_s must be finite and >= 0")
        if not (math.isfinite(self.softmax_beta) and self.softmax_beta > 0):
            raise InvalidParamsError("softmax_beta must be > 0")


@dataclass(frozen=True)
class CostBreakdown:
    """Objective value split into its terms, plus the constraint verdict."""

    total_J: float
    energy_J: float
    penalty_Vs: float        # integral of the limit overshoot (V s)
    penalty_J: float         # lam * penalty^2 contribution to total
    margin_mV: float         # peak v_m minus threshold
    feasible: bool           # activated and penalty exactly zero


def penalty_integral(pulse: SampledPulse, limits: VoltageLimits) -> float:
    """Voltage-limit overshoot integral in volt-seconds.

    Piecewise-constant interval voltages make this an exact sum.
    """
    v = pulse.voltage
    over = np.maximum(v - limits.v_max, 0.0)
    under = np.maximum(limits.v_min - v, 0.0)
    return float((np.sum(over) + np.sum(under)) * pulse.dt_us * 1e-6)


def smooth_peak(v_m: np.ndarray, beta: float) -> float:
    """Log-sum-exp softmax of a membrane trace (mV).

    Upper bound on the true peak, at most ln(len) / beta above it, and
    smooth in the underlying waveform parameters.
    """
    m = float(np.max(v_m))
    return m + math.log(float(np.sum(np.exp(beta * (v_m - m))))) / beta


def smooth_margin_slack(n_samples: int, beta: float) -> float:
    """Gap to add to the threshold so the smooth margin implies the
    binary one: lse <= peak + ln(n)/beta."""
    return math.log(n_samples) / beta


def activation_constraint(w: SplineWaveform, cfg: ObjectiveConfig,
                          exact: bool = False) -> float:
    """Smooth activation margin, positive when comfortably activated.

    Returns lse(v_m) - threshold - slack, so a positive value guarantees
    peak v_m > threshold.

    Note the sign convention: this is a margin (bigger is better), not a
    <= 0 constraint residual.
    """
    pulse = sample(w, cfg.coil)
    trace = neuron.simulate(pulse.efield, cfg.neuron_params,
                            dt_us=pulse.dt_us, tail_us=cfg.tail_us,
                            substeps=cfg.substeps, exact=exact)
    lse = smooth_peak(trace.v_m, cfg.softmax_beta)
    slack = smooth_margin_slack(trace.v_m.shape[0], cfg.softmax_beta)
    return lse - cfg.v_threshold_mV - slack


def cost_of_pulse(pulse: SampledPulse, cfg: ObjectiveConfig,
                  exact: bool = False) -> CostBreakdown:
    """Cost terms for an already-sampled pulse."""
    w_j = energy_loss(pulse)
    p_vs = penalty_integral(pulse, cfg.limits)
    p_j = cfg.lam_S_per_s * p_vs * p_vs
    trace = neuron.simulate(pulse.efield, cfg.neuron_params,
                            dt_us=pulse.dt_us, tail_us=cfg.tail_us,
                            substeps=cfg.substeps, exact=exact)
    act = neuron.check_activation(trace, cfg.v_threshold_mV)
    return CostBreakdown(total_J=w_j + p_j, energy_J=w_j, penalty_Vs=p_vs,
                         penalty_J=p_j, margin_mV=act.margin_mV,
                         feasible=act.activated and p_vs == 0.0)


def cost(w: SplineWaveform, cfg: ObjectiveConfig,
         exact: bool = False) -> CostBreakdown:
    """Full objective for a spline waveform."""
    return cost_of_pulse(sample(w, cfg.coil), cfg, exact=exact)
