"""Hybrid global-local search for energy-minimal activating waveforms.

The global layer is a particle swarm whose particles each carry their
own spline resolution (degrees of freedom). Every swarm iteration runs a
constrained local solve per particle, updates personal and global bests
with feasible results only, adapts particle DOF, applies the swarm
velocity update, and reseeds the worst particle near the global best.

The local solve treats the voltage limits and the all-or-none activation
requirement as hard constraints:

1. restoration: voltage violations are removed by minimising a convex
   squared-hinge of the limit overshoot (exact zero is reachable because
   the feasible polytope has interior), and a non-activating start is
   rescued by titration scale-up when the scaled pulse stays within the
   limits, or by blending towards a known activating template otherwise;
2. descent: relaxed log-barrier rounds with decreasing barrier weight,
   each minimised by L-BFGS-B. Gradients of the energy and voltage terms
   are exact (the knot-to-sample map is linear); the activation margin
   gradient comes from a reverse sweep through the membrane integrator
   when the compiled backend is present (two simulations per gradient,
   independent of the knot count) and from central differences otherwise;
3. every evaluation updates a best-feasible tracker, and the tracker
   value is what the solve returns, so results always satisfy both hard
   constraints no matter where the descent wandered.

Determinism: all randomness flows from one seed through per-particle
substreams, and local solves are deterministic, so runs are reproducible
for a fixed configuration regardless of worker count.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from . import _backend, neuron
from .errors import (InfeasibleResultError, IntegrationFailureError,
                     InvalidParamsError, NonExcitableShapeError,
                     OptimizationFailedError)
from .objective import CostBreakdown, ObjectiveConfig, smooth_margin_slack
from .waveform import DT_US, SampledPulse, SplineWaveform, sample

logger = logging.getLogger(__name__)

# relaxed log-barrier shape; margins are normalised before rb() is applied
_TAU0_REL = 0.1        # first barrier weight relative to the cost scale
_TAU_DECAY = 0.2       # weight shrink factor per round
_N_ROUNDS = 3
_DELTA_V = 0.02        # relaxation knee of the voltage barrier
_DELTA_G = 0.25        # relaxation knee of the activation barrier
_G_REF_MV = 20.0       # activation-margin normalisation
_SNAP_EPS_REL = 1e-3   # strict interior margin left by the snap
_TEMPLATE_HEADROOM = 0.85
_LEAD_TAU_US = 120.0   # seed pre-charge timescale (us)
_STALL_PATIENCE = 12   # stalled iterations before the swarm stops early
_POLISH_BUDGET_MULT = 3  # final-solve budget, in units of local_budget
_SHIFT_TRIES_US = (120.0, 240.0, 480.0)  # later-placement retries
_SHIFT_TIE_REL = 5e-3  # cost slack for accepting a later placement


@dataclass(frozen=True)
class SwarmConfig:
    """Global-search settings; defaults are the desk-scale budget."""

    n_particles: int = 8
    max_iterations: int = 30
    local_budget: int = 2000        # simulator evaluations per local solve
    inertia: float = 0.9
    c_personal: float = 1.2
    c_global: float = 0.12
    dof_init_lo: int = 25
    dof_init_hi: int = 100
    dof_increment: int = 5
    dof_cap: int = 1000
    restart_noise: float = 0.05     # relative to the global-best knot scale
    init_mode: str = "scaled"       # "scaled" | "literal"
    seed: int = 0
    n_workers: int = 1
    conv_rel_improvement: float = 1e-3

    def __post_init__(self):
        if self.n_particles < 1 or self.max_iterations < 1:
            raise InvalidParamsError("need >= 1 particle and >= 1 iteration")
        if self.local_budget < 1:
            raise InvalidParamsError("local_budget must be > 0")
        if not 4 <= self.dof_init_lo <= self.dof_init_hi <= self.dof_cap:
            raise InvalidParamsError(
                "need 4 <= dof_init_lo <= dof_init_hi <= dof_cap")
        if self.dof_increment < 1:
            raise InvalidParamsError("dof_increment must be >= 1")
        if self.init_mode not in ("scaled", "literal"):
            raise InvalidParamsError(f"unknown init_mode {self.init_mode!r}")
        for name in ("inertia", "c_personal", "c_global", "restart_noise"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParamsError(f"{name} must be finite and >= 0")
        if self.n_workers < 1:
            raise InvalidParamsError("n_workers must be >= 1")


@dataclass(frozen=True)
class Particle:
    """One swarm member: position waveform, velocity over interior knots,
    personal best, and the flags driving DOF adaptation."""

    waveform: SplineWaveform
    velocity: np.ndarray
    best_waveform: SplineWaveform = None
    best_cost: CostBreakdown = None
    converged: bool = False
    improved: bool = False

    def __post_init__(self):
        v = np.array(self.velocity, dtype=np.float64)
        if v.shape != (self.waveform.n_dof - 2,):
            raise InvalidParamsError(
                "velocity must match the interior knot count")
        v.flags.writeable = False
        object.__setattr__(self, "velocity", v)


@dataclass(frozen=True)
class LocalResult:
    """Outcome of one local solve."""

    waveform: SplineWaveform
    cost: CostBreakdown
    n_evaluations: int
    converged: bool


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    best_total_J: float
    best_energy_J: float
    best_dof: int


@dataclass(frozen=True)
class OptimizationRun:
    """Everything a finished optimisation reports."""

    best_waveform: SplineWaveform
    best_cost: CostBreakdown
    history: tuple
    objective: ObjectiveConfig
    swarm: SwarmConfig
    n_evaluations: int
    wall_time_s: float
    terminated: str
    backend: str


@lru_cache(maxsize=32)
def _sample_matrix(n_knots: int, m_out: int) -> np.ndarray:
    """Dense linear map from interior knots to current samples."""
    s = np.empty((m_out, n_knots - 2))
    basis = np.zeros(n_knots)
    for i in range(1, n_knots - 1):
        basis[i] = 1.0
        s[:, i - 1] = _backend.spline_sample_uniform(basis, m_out)
        basis[i] = 0.0
    s[0, :] = 0.0
    s[-1, :] = 0.0
    return s


def _rb(u, delta):
    """Relaxed -log barrier: exact outside the knee, quadratic below it,
    finite everywhere (so line searches and difference probes survive
    constraint violations)."""
    u = np.asarray(u, dtype=np.float64)
    safe = np.maximum(u, delta)
    quad = (u - 2.0 * delta) / delta
    return np.where(u >= delta, -np.log(safe),
                    -math.log(delta) + 0.5 * (quad * quad - 1.0))


def _rb_prime(u, delta):
    u = np.asarray(u, dtype=np.float64)
    safe = np.maximum(u, delta)
    return np.where(u >= delta, -1.0 / safe, (u - 2.0 * delta) / delta ** 2)


class _LocalSolve:
    """State of one constrained local solve (see the module docstring)."""

    def __init__(self, w: SplineWaveform, cfg: ObjectiveConfig, budget: int):
        self.cfg = cfg
        self.base = w
        self.n = w.n_dof - 2
        self.window_us = w.window_ms * 1000.0
        self.m = round(self.window_us / DT_US) + 1
        self.budget = int(budget)
        self.n_sims = 0
        self.best_x = None
        self.best_cost = None
        self.attempt_x = w.free
        self.attempt_cost = None
        self._last = None

        self.s_mat = _sample_matrix(w.n_dof, self.m)
        # interval voltage per unit interior knot, V per A
        self.v_mat = (cfg.coil.inductance_uH / DT_US) * np.diff(
            self.s_mat, axis=0)
        self.v_scale = 0.5 * (cfg.limits.v_max - cfg.limits.v_min)
        self.snap_eps = _SNAP_EPS_REL * self.v_scale
        self.tail_steps = int(round(cfg.tail_us / DT_US))
        self.slack = smooth_margin_slack(self.m + self.tail_steps,
                                         cfg.softmax_beta)
        self._energy_c = cfg.coil.resistance_mohm * DT_US / 3.0 * 1e-9
        self.adjoint = _backend.HAVE_GRAD

    # knots -> dense traces -------------------------------------------------

    def _current(self, x):
        knots = np.zeros(self.n + 2)
        knots[1:-1] = x
        cur = _backend.spline_sample_uniform(knots, self.m)
        cur[0] = 0.0
        cur[-1] = 0.0
        return cur

    def _margin_of(self, vm):
        peak = float(np.max(vm))
        lse = peak + math.log(float(np.sum(np.exp(
            self.cfg.softmax_beta * (vm - peak))))) / self.cfg.softmax_beta
        g = lse - self.cfg.v_threshold_mV - self.slack
        return g, peak > self.cfg.v_threshold_mV, peak

    def _simulate_margin(self, efield):
        """Smooth activation margin and binary verdict; one simulator call.
        A diverged integration counts as a hard non-activation."""
        self.n_sims += 1
        try:
            trace = neuron.simulate(efield, self.cfg.neuron_params,
                                    dt_us=DT_US, tail_us=self.cfg.tail_us,
                                    substeps=self.cfg.substeps)
        except IntegrationFailureError:
            return -1e9, False, -1e9
        return self._margin_of(trace.v_m)

    def _simulate_margin_fused(self, efield):
        """Margin, verdict and margin gradient with respect to the field
        samples, from one fused forward-plus-reverse sweep."""
        self.n_sims += 2
        try:
            trace, g_e = neuron.simulate_with_peak_grad(
                efield, self.cfg.neuron_params, dt_us=DT_US,
                tail_us=self.cfg.tail_us, substeps=self.cfg.substeps,
                beta=self.cfg.softmax_beta)
        except IntegrationFailureError:
            return -1e9, False, -1e9, np.zeros(efield.shape[0])
        g, activated, peak = self._margin_of(trace.v_m)
        return g, activated, peak, g_e

    # full evaluation with best-feasible tracking ---------------------------

    def evaluate(self, x):
        if self._last is not None and np.array_equal(self._last[0], x):
            return self._last[1]
        cur = self._current(x)
        a, b = cur[:-1], cur[1:]
        energy = float(np.sum(a * (a + b) + b * b)) * self._energy_c
        didt = np.diff(cur) / DT_US
        volt = self.cfg.coil.inductance_uH * didt
        over = np.maximum(volt - self.cfg.limits.v_max, 0.0)
        under = np.maximum(self.cfg.limits.v_min - volt, 0.0)
        pen = float((np.sum(over) + np.sum(under)) * DT_US * 1e-6)
        if self.adjoint:
            g, activated, peak, g_e = self._simulate_margin_fused(
                self.cfg.coil.field_map * didt)
        else:
            g, activated, peak = self._simulate_margin(
                self.cfg.coil.field_map * didt)
            g_e = None
        total = energy + self.cfg.lam_S_per_s * pen * pen
        ev = {"x": np.array(x), "cur": cur, "volt": volt, "energy": energy,
              "penalty": pen, "g": g, "activated": activated, "peak": peak,
              "total": total, "g_e": g_e}
        feasible = activated and pen == 0.0
        if feasible and (self.best_cost is None or total < self.best_cost):
            self.best_cost = total
            self.best_x = np.array(x)
        if self.attempt_cost is None or total < self.attempt_cost:
            self.attempt_cost = total
            self.attempt_x = np.array(x)
        self._last = (np.array(x), ev)
        return ev

    # restoration ------------------------------------------------------------

    def snap_feasible(self, x):
        """Convex squared-hinge minimisation onto the strict interior of
        the voltage polytope. Uses only linear algebra, no simulations."""
        lim = self.cfg.limits
        eps = self.snap_eps
        for attempt in range(4):
            hi = lim.v_max - eps * (1.0 + attempt)
            lo = lim.v_min + eps * (1.0 + attempt)

            def q_and_grad(z):
                volt = self.v_mat @ z
                up = np.maximum(volt - hi, 0.0)
                dn = np.maximum(lo - volt, 0.0)
                q = float(np.sum(up * up) + np.sum(dn * dn))
                grad = self.v_mat.T @ (2.0 * (up - dn))
                return q, grad

            if q_and_grad(x)[0] == 0.0:
                return np.array(x)
            res = minimize(q_and_grad, x, jac=True, method="L-BFGS-B",
                           options={"maxiter": 400, "ftol": 0.0,
                                    "gtol": 1e-14})
            x = res.x
            volt = self.v_mat @ x
            if float(np.max(volt)) <= lim.v_max and \
                    float(np.min(volt)) >= lim.v_min:
                return x
        raise InfeasibleResultError(
            "could not project the waveform inside the voltage limits",
            waveform=self.base.with_free(np.asarray(x)),
            cost=None)

    def _within_limits(self, volt, factor=1.0):
        return (float(np.max(volt)) * factor <= self.cfg.limits.v_max
                and float(np.min(volt)) * factor >= self.cfg.limits.v_min)

    def restore(self, x):
        """Return a feasible starting point (activated, zero penalty)."""
        ev = self.evaluate(x)
        if ev["penalty"] > 0.0:
            x = self.snap_feasible(x)
            ev = self.evaluate(x)
        if ev["activated"]:
            return x

        # titration scale-up if the scaled pulse stays inside the limits
        if np.any(ev["cur"] != 0.0):
            try:
                probes = [0]

                def active(s):
                    g, act, _ = self._simulate_margin(
                        self.cfg.coil.field_map
                        * np.diff(ev["cur"] * s) / DT_US)
                    probes[0] += 1
                    return act

                s_hi = None
                s = 2.0
                while s <= 4096.0 and probes[0] < 40:
                    if active(s):
                        s_hi = s
                        break
                    s *= 2.0
                if s_hi is not None:
                    lo = s_hi / 2.0
                    for _ in range(8):
                        mid = 0.5 * (lo + s_hi)
                        if active(mid):
                            s_hi = mid
                        else:
                            lo = mid
                    factor = s_hi * 1.02
                    if self._within_limits(ev["volt"], factor):
                        ev2 = self.evaluate(np.asarray(x) * factor)
                        if ev2["activated"] and ev2["penalty"] == 0.0:
                            return ev2["x"]
            except NonExcitableShapeError:
                pass

        # blend towards an in-limits activating template
        t_knots = _template_knots(self.cfg, self.base.window_ms, self.n + 2)
        for theta in (0.25, 0.5, 0.75, 1.0):
            xb = (1.0 - theta) * np.asarray(x) + theta * t_knots
            xb = self.snap_feasible(xb)
            ev = self.evaluate(xb)
            if ev["activated"] and ev["penalty"] == 0.0:
                return xb
        self._raise_infeasible("no activating in-limits point found")

    def _raise_infeasible(self, msg):
        xw = self.best_x if self.best_x is not None else self.attempt_x
        w = self.base.with_free(np.asarray(xw))
        raise InfeasibleResultError(msg, waveform=w, cost=None)

    # barrier descent ---------------------------------------------------------

    def _barrier_terms(self, volt):
        lim = self.cfg.limits
        m_up = (lim.v_max - volt) / self.v_scale
        m_dn = (volt - lim.v_min) / self.v_scale
        w = DT_US / self.window_us
        phi = float(np.sum(_rb(m_up, _DELTA_V) + _rb(m_dn, _DELTA_V))) * w
        dphi_dv = (self.v_mat.T @ (
            (-_rb_prime(m_up, _DELTA_V) + _rb_prime(m_dn, _DELTA_V))
            / self.v_scale)) * w
        return phi, dphi_dv

    def _fd_step(self, x):
        scale = max(1.0, float(np.max(np.abs(x))))
        return np.maximum(1e-4 * np.abs(x), 1e-3 * scale)

    def _margin_grad_from_field(self, g_e):
        """Chain the field-space margin gradient back to interior knots
        (field samples are scaled first differences of the current)."""
        c = self.cfg.coil.field_map / DT_US
        gi = np.zeros(self.m)
        gi[1:] += c * g_e
        gi[:-1] -= c * g_e
        return self.s_mat.T @ gi

    def _margin_grad(self, x, h):
        """Central finite differences of the smooth activation margin."""
        grad = np.empty(self.n)
        knots = np.zeros(self.n + 2)
        for i in range(self.n):
            knots[1:-1] = x
            knots[i + 1] = x[i] + h[i]
            cur = _backend.spline_sample_uniform(knots, self.m)
            cur[0] = 0.0
            cur[-1] = 0.0
            g_hi, _, _ = self._simulate_margin(
                self.cfg.coil.field_map * np.diff(cur) / DT_US)
            knots[i + 1] = x[i] - h[i]
            cur = _backend.spline_sample_uniform(knots, self.m)
            cur[0] = 0.0
            cur[-1] = 0.0
            g_lo, _, _ = self._simulate_margin(
                self.cfg.coil.field_map * np.diff(cur) / DT_US)
            grad[i] = (g_hi - g_lo) / (2.0 * h[i])
            knots[i + 1] = x[i]
        return grad

    def barrier_rounds(self, x):
        ev = self.evaluate(x)
        j_ref = max(abs(ev["total"]), 1e-2)
        n_rounds = _N_ROUNDS
        for r in range(n_rounds):
            tau = _TAU0_REL * j_ref * _TAU_DECAY ** r
            remaining = self.budget - self.n_sims
            if remaining <= 0:
                break
            per_round = remaining // (n_rounds - r)
            # the solver evaluates fun and jac together at every trial
            # point; with the adjoint that costs one fused sweep (counted
            # as two simulator calls), without it 2n + 1 calls
            pair_cost = 2 if self.adjoint else 2 * self.n + 1
            maxfun = max(2, int(per_round // pair_cost))

            def fun(z):
                e = self.evaluate(z)
                phi_v, _ = self._barrier_terms(e["volt"])
                phi_g = float(_rb(e["g"] / _G_REF_MV, _DELTA_G))
                return e["total"] + tau * (phi_v + phi_g)

            def jac(z):
                e = self.evaluate(z)
                cur = e["cur"]
                u = np.zeros(self.m)
                a, b = cur[:-1], cur[1:]
                u[:-1] += 2.0 * a + b
                u[1:] += a + 2.0 * b
                g_energy = self._energy_c * (self.s_mat.T @ u)
                _, dphi_v = self._barrier_terms(e["volt"])
                if e["g_e"] is not None:
                    dg = self._margin_grad_from_field(e["g_e"])
                else:
                    dg = self._margin_grad(z, self._fd_step(z))
                dphi_g = float(_rb_prime(e["g"] / _G_REF_MV, _DELTA_G)) \
                    / _G_REF_MV * dg
                # the quadratic volt-second penalty is zero on the barrier
                # path (iterates stay inside the limits), so its gradient
                # contribution is dropped
                return g_energy + tau * (dphi_v + dphi_g)

            res = minimize(fun, x, jac=jac, method="L-BFGS-B",
                           options={"maxiter": 10 ** 6, "maxfun": maxfun,
                                    "maxcor": 12, "ftol": 1e-14,
                                    "gtol": 1e-12})
            x = res.x
            self._solver_converged = bool(res.success)
        return x

    def finish(self, x):
        """Final snap and bookkeeping; returns the best feasible point."""
        ev = self.evaluate(x)
        if ev["penalty"] > 0.0 or not ev["activated"]:
            try:
                xs = self.snap_feasible(x)
                self.evaluate(xs)
            except InfeasibleResultError:
                pass
        if self.best_x is None:
            self._raise_infeasible("budget exhausted before feasibility")
        return self.best_x

    def _exact_activated(self, cur):
        """Activation verdict under per-step rate evaluation."""
        self.n_sims += 1
        try:
            trace = neuron.simulate(
                self.cfg.coil.field_map * np.diff(cur) / DT_US,
                self.cfg.neuron_params, dt_us=DT_US,
                tail_us=self.cfg.tail_us, substeps=self.cfg.substeps,
                exact=True)
        except IntegrationFailureError:
            return False
        return float(np.max(trace.v_m)) > self.cfg.v_threshold_mV

    def exact_gate(self, x):
        """A waveform can park the membrane next to the activation
        saddle, where the verdict hinges on a slow escape and the
        tabulated rates cannot be trusted to pick the same side as the
        per-step rates. Accept only points whose activation survives
        per-step evaluation; rescue near-misses with the smallest
        amplitude bump that does."""
        if not _backend.HAVE_TABULATED:
            return x
        ev = self.evaluate(x)
        if self._exact_activated(ev["cur"]):
            return x
        for f in (1.002, 1.005, 1.01, 1.02, 1.05):
            ev2 = self.evaluate(np.asarray(x) * f)
            if ev2["penalty"] > 0.0:
                break
            if ev2["activated"] and self._exact_activated(ev2["cur"]):
                return ev2["x"]
        self._raise_infeasible(
            "activation does not survive per-step rate evaluation")


def _template_knots(cfg: ObjectiveConfig, window_ms: float,
                    n_dof: int) -> np.ndarray:
    """Interior knots of an activating triangle pulse that respects the
    voltage limits with headroom."""
    d_us, i_peak = _template_shape(cfg, window_ms)
    t_knot = np.linspace(0.0, window_ms * 1000.0, n_dof)
    t_fall = d_us * cfg.limits.v_max / -cfg.limits.v_min
    up = t_knot / d_us
    down = (d_us + t_fall - t_knot) / t_fall
    tri = i_peak * np.clip(np.minimum(up, down), 0.0, 1.0)
    return tri[1:-1]


def _bipolar_template_knots(cfg: ObjectiveConfig, window_ms: float,
                            n_dof: int, theta: float,
                            lead_mult: float) -> np.ndarray:
    """Interior knots of a bipolar-current seed shape.

    The current ramps gently to a negative pre-charge, sweeps fast to a
    positive peak (rise duration from the activating template, swing
    split ``theta`` below zero), returns to zero along the negative
    limit, then idles. Seeding part of the swarm here puts particles in
    the basin where the fast depolarising sweep starts from a negative
    current, which halves the peak current a given field dose needs.
    """
    window_us = window_ms * 1000.0
    d_us, i_swing = _template_shape(cfg, window_ms)
    ratio = cfg.limits.v_max / -cfg.limits.v_min
    lead_min = theta * d_us * ratio
    # the pre-charge rides membrane dynamics, not the voltage limits, so
    # never seed it shorter than the membrane timescale
    lead = max(lead_mult * d_us, lead_min, lead_mult * _LEAD_TAU_US)
    fall = (1.0 - theta) * d_us * ratio
    total = lead + d_us + fall
    room = window_us - 2.0 * DT_US
    if total > room:
        lead = room - d_us - fall
        if lead < lead_min:
            return _template_knots(cfg, window_ms, n_dof)
    t_break = np.array([0.0, lead, lead + d_us, lead + d_us + fall,
                        window_us])
    i_break = np.array([0.0, -theta * i_swing, (1.0 - theta) * i_swing,
                        0.0, 0.0])
    t_knot = np.linspace(0.0, window_us, n_dof)
    return np.interp(t_knot, t_break, i_break)[1:-1]


@lru_cache(maxsize=32)
def _template_shape(cfg: ObjectiveConfig, window_ms: float) -> tuple:
    """Rise duration (us) and peak current (A) of the rescue template.

    The template rides the voltage limits at reduced amplitude; its rise
    duration is titrated to 1.5x the activation threshold.
    """
    window_us = window_ms * 1000.0
    v_up = _TEMPLATE_HEADROOM * cfg.limits.v_max
    v_dn = _TEMPLATE_HEADROOM * -cfg.limits.v_min
    ratio = v_up / v_dn
    d_max = (window_us - 2 * DT_US) / (1.0 + ratio)
    params = cfg.neuron_params

    def active(d_us):
        t = np.arange(round(window_us / DT_US) + 1) * DT_US
        t_fall = d_us * ratio
        tri = np.clip(np.minimum(t / d_us, (d_us + t_fall - t) / t_fall),
                      0.0, 1.0) * (v_up * d_us / cfg.coil.inductance_uH)
        ef = cfg.coil.field_map * np.diff(tri) / DT_US
        tr = neuron.simulate(ef, params, dt_us=DT_US, tail_us=cfg.tail_us,
                             substeps=cfg.substeps)
        return neuron.check_activation(tr, cfg.v_threshold_mV).activated

    hi = min(25.0, d_max)
    while not active(hi):
        if hi >= d_max:
            raise NonExcitableShapeError(
                "voltage limits admit no activating pulse in the window")
        hi = min(hi * 2.0, d_max)
    lo = hi / 2.0
    for _ in range(8):
        mid = 0.5 * (lo + hi)
        if active(mid):
            hi = mid
        else:
            lo = mid
    d_us = min(hi * 1.5, d_max)
    return d_us, v_up * d_us / cfg.coil.inductance_uH


def local_optimize(w: SplineWaveform, cfg: ObjectiveConfig,
                   budget: int = 2000, cost_fn=None) -> LocalResult:
    """Constrained local solve from a starting waveform.

    The returned waveform is feasible (activated, zero voltage-limit
    penalty). Raises InfeasibleResultError with the best attempt attached
    when the budget runs out before any feasible point is seen.

    With ``cost_fn`` the solve instead minimises an arbitrary scalar of
    the waveform without constraints (used for solver verification);
    only ``total_J`` of the returned breakdown is meaningful then.
    """
    if budget < 1:
        raise InvalidParamsError("budget must be > 0")
    if cost_fn is not None:
        return _minimize_surrogate(w, cost_fn, budget)

    solve = _LocalSolve(w, cfg, budget)
    x = solve.restore(w.free)
    x = solve.barrier_rounds(x)
    x_best = solve.finish(x)
    x_best = solve.exact_gate(x_best)

    from .objective import cost as full_cost
    w_out = w.with_free(x_best)
    return LocalResult(waveform=w_out, cost=full_cost(w_out, cfg),
                       n_evaluations=solve.n_sims,
                       converged=getattr(solve, "_solver_converged", False))


def _minimize_surrogate(w: SplineWaveform, cost_fn, budget: int) -> LocalResult:
    calls = [0]

    def fun(x):
        calls[0] += 1
        return float(cost_fn(w.with_free(x)))

    def jac(x):
        h = np.maximum(1e-6 * np.abs(x), 1e-7)
        g = np.empty(x.shape[0])
        for i in range(x.shape[0]):
            xp = np.array(x)
            xm = np.array(x)
            xp[i] += h[i]
            xm[i] -= h[i]
            g[i] = (fun(xp) - fun(xm)) / (2.0 * h[i])
        return g

    maxiter = max(2, budget // (2 * max(1, w.n_dof - 2) + 4))
    res = minimize(fun, w.free, jac=jac, method="L-BFGS-B",
                   options={"maxiter": maxiter, "ftol": 1e-15, "gtol": 1e-12})
    cb = CostBreakdown(total_J=float(res.fun), energy_J=math.nan,
                       penalty_Vs=math.nan, penalty_J=math.nan,
                       margin_mV=math.nan, feasible=True)
    return LocalResult(waveform=w.with_free(res.x), cost=cb,
                       n_evaluations=calls[0], converged=bool(res.success))


# swarm layer ----------------------------------------------------------------


def _init_sigma(cfg: ObjectiveConfig, scfg: SwarmConfig, n_dof: int,
                window_us: float) -> float:
    if scfg.init_mode == "literal":
        return float(n_dof)
    # knot scale such that knot-to-knot swings produce voltages of the
    # order of the limits
    return (cfg.limits.v_max * window_us
            / (cfg.coil.inductance_uH * n_dof))


def init_particles(cfg: ObjectiveConfig, scfg: SwarmConfig,
                   rngs, window_ms: float) -> list:
    """Mixed start population: odd particles are jittered bipolar seed
    shapes with varied pre-charge split and lead duration (known-good
    basin), even particles are random smooth noise (exploration). Falls
    back to all-random when no activating template exists."""
    particles = []
    window_us = window_ms * 1000.0
    lo_seeded = (scfg.dof_init_lo + scfg.dof_init_hi) // 2
    for i in range(scfg.n_particles):
        rng = rngs[i]
        knots = None
        if i % 2 == 1:
            n = int(rng.integers(lo_seeded, scfg.dof_init_hi + 1))
            theta = rng.uniform(0.12, 0.5)
            lead_mult = rng.uniform(4.0, 8.0)
            try:
                free = _bipolar_template_knots(cfg, window_ms, n,
                                               theta, lead_mult)
                scale = float(np.max(np.abs(free)))
                free = free + rng.normal(0.0, 0.05 * scale, n - 2)
                knots = np.zeros(n)
                knots[1:-1] = free
            except NonExcitableShapeError:
                knots = None
        if knots is None:
            n = int(rng.integers(scfg.dof_init_lo, scfg.dof_init_hi + 1))
            sigma = _init_sigma(cfg, scfg, n, window_us)
            knots = rng.normal(0.0, sigma, n)
            knots[0] = 0.0
            knots[-1] = 0.0
        w = SplineWaveform(knots, window_ms)
        particles.append(Particle(waveform=w, velocity=np.zeros(n - 2)))
    return particles


def swarm_step(particles, global_best: SplineWaveform, scfg: SwarmConfig,
               rngs) -> list:
    """Velocity and position update over interior knots.

    Personal and global bests are resampled onto each particle's current
    DOF before the update, so mixed-resolution swarms stay consistent.
    """
    from .waveform import resample_dof

    out = []
    for i, p in enumerate(particles):
        if p.best_waveform is None or global_best is None:
            out.append(p)
            continue
        rng = rngs[i]
        n = p.waveform.n_dof
        x = p.waveform.free
        pb = resample_dof(p.best_waveform, n).free
        gb = resample_dof(global_best, n).free
        r1 = rng.random(n - 2)
        r2 = rng.random(n - 2)
        vel = (scfg.inertia * p.velocity
               + scfg.c_personal * r1 * (pb - x)
               + scfg.c_global * r2 * (gb - x))
        out.append(replace(p, waveform=p.waveform.with_free(x + vel),
                           velocity=vel))
    return out


def adapt_dof(p: Particle, scfg: SwarmConfig) -> Particle:
    """Grow a particle's DOF when its local solve converged and still
    improved its personal best; waveform and velocity are resampled.
    Growth is proportional so fine time structure (fast rise intervals)
    becomes reachable within a few tens of iterations."""
    from .waveform import resample_dof

    if not (p.converged and p.improved):
        return p
    inc = max(scfg.dof_increment, int(round(0.15 * p.waveform.n_dof)))
    n_new = min(p.waveform.n_dof + inc, scfg.dof_cap)
    if n_new == p.waveform.n_dof:
        return p
    w_new = resample_dof(p.waveform, n_new)
    vel_pad = np.zeros(p.waveform.n_dof)
    vel_pad[1:-1] = p.velocity
    vel_new = np.asarray(_backend.spline_sample_uniform(vel_pad, n_new))
    return replace(p, waveform=w_new, velocity=vel_new[1:-1])


def _shifted(w: SplineWaveform, shift_us: float) -> SplineWaveform:
    """The same waveform translated later in its window (zero-filled).

    New knot values come from the densely sampled spline, not from
    interpolating between old knots, which would flatten any feature
    narrower than the knot spacing."""
    window_us = w.window_ms * 1000.0
    m = round(window_us / DT_US) + 1
    dense = _backend.spline_sample_uniform(np.asarray(w.knots, float), m)
    t_dense = np.arange(m) * DT_US
    t_knot = np.linspace(0.0, window_us, w.n_dof)
    k = np.interp(t_knot - shift_us, t_dense, dense, left=0.0, right=0.0)
    k[0] = 0.0
    k[-1] = 0.0
    return SplineWaveform(k, w.window_ms)


def _reseat(w: SplineWaveform, cfg: ObjectiveConfig) -> tuple:
    """Feasibility repair for a translated optimum.

    Translation perturbs the knot-to-feature alignment just enough to
    lose a zero-margin activation, and a waveform riding the voltage
    limits cannot be scaled straight up, so: snap into the polytope,
    then take the smallest scale-and-project bump that recovers
    activation. Returns (waveform, n_sims); raises InfeasibleResultError
    when no bump works."""
    solve = _LocalSolve(w, cfg, budget=64)
    x = solve.snap_feasible(w.free)
    ev = solve.evaluate(x)
    if not ev["activated"]:
        for f in (1.02, 1.05, 1.1):
            xp = solve.snap_feasible(np.asarray(x) * f)
            ev = solve.evaluate(xp)
            if ev["activated"] and ev["penalty"] == 0.0:
                x = xp
                break
        else:
            raise InfeasibleResultError(
                "translated waveform lost activation",
                waveform=w, cost=None)
    return w.with_free(np.asarray(x)), solve.n_sims


def run_optimization(cfg: ObjectiveConfig, scfg: SwarmConfig = None,
                     window_ms: float = 3.0) -> OptimizationRun:
    """Full hybrid search; returns the feasible global best.

    Raises OptimizationFailedError if no particle ever reaches
    feasibility (pathological limits or far too small a budget).
    """
    scfg = scfg or SwarmConfig()
    t0 = time.perf_counter()
    ss = np.random.SeedSequence(scfg.seed)
    rngs = [np.random.default_rng(c) for c in ss.spawn(scfg.n_particles)]
    particles = init_particles(cfg, scfg, rngs, window_ms)

    g_best_w = None
    g_best_cb = None
    n_evals = 0
    history = []
    terminated = "max_iterations"
    stall = 0
    prev_best = math.inf

    def solve_one(p: Particle):
        try:
            r = local_optimize(p.waveform, cfg, scfg.local_budget)
            return r.waveform, r.cost, r.n_evaluations, r.converged
        except InfeasibleResultError as exc:
            return exc.waveform or p.waveform, None, scfg.local_budget, False
        except NonExcitableShapeError:
            return p.waveform, None, scfg.local_budget, False

    for it in range(scfg.max_iterations):
        if scfg.n_workers > 1:
            with ThreadPoolExecutor(max_workers=scfg.n_workers) as pool:
                results = list(pool.map(solve_one, particles))
        else:
            results = [solve_one(p) for p in particles]

        next_particles = []
        for p, (w, cb, sims, conv) in zip(particles, results):
            n_evals += sims
            improved = False
            best_w, best_cb = p.best_waveform, p.best_cost
            if cb is not None and cb.feasible:
                if best_cb is None or cb.total_J < best_cb.total_J:
                    best_w, best_cb = w, cb
                    improved = True
            next_particles.append(replace(
                p, waveform=w, best_waveform=best_w, best_cost=best_cb,
                converged=conv, improved=improved))
        particles = next_particles

        for p in particles:
            if p.best_cost is not None and (
                    g_best_cb is None
                    or p.best_cost.total_J < g_best_cb.total_J):
                g_best_w, g_best_cb = p.best_waveform, p.best_cost

        history.append(IterationRecord(
            iteration=it,
            best_total_J=g_best_cb.total_J if g_best_cb else math.nan,
            best_energy_J=g_best_cb.energy_J if g_best_cb else math.nan,
            best_dof=g_best_w.n_dof if g_best_w else 0))
        logger.info("iter %d best %s dof %s evals %d", it,
                    f"{history[-1].best_total_J:.4g}",
                    history[-1].best_dof, n_evals)

        cur_best = history[-1].best_total_J
        if math.isfinite(cur_best) and math.isfinite(prev_best):
            rel = (prev_best - cur_best) / abs(prev_best)
            stall = stall + 1 if rel < scfg.conv_rel_improvement else 0
        if math.isfinite(cur_best):
            prev_best = cur_best
        if stall >= _STALL_PATIENCE and g_best_w is not None:
            terminated = "converged"
            break

        if it == scfg.max_iterations - 1:
            break

        particles = [adapt_dof(p, scfg) for p in particles]
        particles = swarm_step(particles, g_best_w, scfg, rngs)

        if g_best_w is not None and scfg.n_particles > 1:
            worst = max(range(len(particles)), key=lambda i: (
                particles[i].best_cost.total_J
                if particles[i].best_cost else math.inf))
            from .waveform import resample_dof
            n = particles[worst].waveform.n_dof
            seed_w = resample_dof(g_best_w, n)
            scale = max(float(np.max(np.abs(seed_w.knots))), 1.0)
            noise = rngs[worst].normal(
                0.0, scfg.restart_noise * scale, n - 2)
            particles[worst] = replace(
                particles[worst],
                waveform=seed_w.with_free(seed_w.free + noise),
                velocity=np.zeros(n - 2))

    if g_best_w is None:
        raise OptimizationFailedError(
            "no feasible waveform found within the budget")

    # the cost is invariant under time translation until the window edge
    # interferes, so the swarm keeps whatever placement it was seeded
    # with; retry the best waveform placed later in the window, which
    # gives a cramped pre-charge room to develop. Placement being a
    # cost-flat direction, a later placement is kept whenever it does
    # not cost measurable energy, not only on strict improvement.
    j_ref = g_best_cb.total_J
    for shift_us in _SHIFT_TRIES_US:
        try:
            w_s, sims = _reseat(_shifted(g_best_w, shift_us), cfg)
            n_evals += sims
            r = local_optimize(w_s, cfg, scfg.local_budget)
        except (InfeasibleResultError, NonExcitableShapeError):
            continue
        n_evals += r.n_evaluations
        if r.cost.feasible and r.cost.total_J <= j_ref * (1.0 + _SHIFT_TIE_REL):
            g_best_w, g_best_cb = r.waveform, r.cost
            j_ref = min(j_ref, r.cost.total_J)

    # intensified final solve on the global best; the swarm-phase budget
    # per particle is sized for breadth, not full convergence
    try:
        r = local_optimize(g_best_w, cfg,
                           budget=_POLISH_BUDGET_MULT * scfg.local_budget)
        n_evals += r.n_evaluations
        if r.cost.feasible and r.cost.total_J < g_best_cb.total_J:
            g_best_w, g_best_cb = r.waveform, r.cost
    except (InfeasibleResultError, NonExcitableShapeError):
        pass

    return OptimizationRun(
        best_waveform=g_best_w, best_cost=g_best_cb, history=tuple(history),
        objective=cfg, swarm=scfg, n_evaluations=n_evals,
        wall_time_s=time.perf_counter() - t0,
        terminated=terminated, backend=_backend.BACKEND)
