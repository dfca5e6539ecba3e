"""Single-compartment nonlinear axon membrane model.

The excitable element is a space-clamped node with fast sodium,
persistent sodium, slow potassium and leak conductances; gating rate
constants are the 36 C set stored in ``data/neuron_default.json``
(temperature scaling already folded into the rate amplitudes). The
induced electric field enters as a proportional transmembrane current,
so threshold behaviour is all-or-none in pulse amplitude.

Potentials are in mV, time in ms inside the integrator (the public API
uses us to match the pulse grid), currents in uA/cm^2, conductances in
mS/cm^2, capacitance in uF/cm^2.
"""

from __future__ import annotations

import json
import math
from collections import namedtuple
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.optimize import brentq

from . import _backend
from .errors import (IntegrationFailureError, InvalidParamsError,
                     NonExcitableShapeError, TitrationAmbiguousError)

PARAMS_SCHEMA_VERSION = 1
GATE_ORDER = ("m", "h", "p", "s")

# Rate-kind encoding shared with the numerical backends.
RATE_KINDS = {"linoid_up": 0, "linoid_down": 1, "sigmoid": 2}

RateFn = namedtuple("RateFn", "kind amp shift slope")


@dataclass(frozen=True)
class NeuronParams:
    """Membrane constants plus the eight gating rate functions.

    ``rates`` holds alpha/beta pairs in gate order m, h, p, s. The
    stimulus coupling converts the induced field (V/m) into an injected
    membrane current density (uA/cm^2).
    """

    cm_uF_cm2: float
    g_leak_mS_cm2: float
    e_leak_mV: float
    g_naf_mS_cm2: float
    e_na_mV: float
    g_nap_mS_cm2: float
    g_ks_mS_cm2: float
    e_k_mV: float
    coupling_uA_cm2_per_V_m: float
    rates: tuple
    name: str = "axon-node-36C"

    def __post_init__(self):
        if not (math.isfinite(self.cm_uF_cm2) and self.cm_uF_cm2 > 0):
            raise InvalidParamsError("cm must be finite and > 0")
        for gname in ("g_leak_mS_cm2", "g_naf_mS_cm2", "g_nap_mS_cm2",
                      "g_ks_mS_cm2"):
            g = getattr(self, gname)
            if not (math.isfinite(g) and g >= 0):
                raise InvalidParamsError(f"{gname} must be finite and >= 0")
        if not (math.isfinite(self.coupling_uA_cm2_per_V_m)
                and self.coupling_uA_cm2_per_V_m > 0):
            raise InvalidParamsError("stimulus coupling must be > 0")
        rates = tuple(RateFn(*r) for r in self.rates)
        if len(rates) != 8:
            raise InvalidParamsError("need 8 rate functions (alpha/beta x 4)")
        for r in rates:
            if r.kind not in RATE_KINDS:
                raise InvalidParamsError(f"unknown rate kind {r.kind!r}")
            if not (math.isfinite(r.amp) and r.amp > 0):
                raise InvalidParamsError("rate amplitude must be > 0")
            if not (math.isfinite(r.slope) and r.slope > 0):
                raise InvalidParamsError("rate slope must be > 0")
        object.__setattr__(self, "rates", rates)


@dataclass(frozen=True)
class MembraneTrace:
    """Membrane potential on the pulse grid plus appended zero-field tail."""

    dt_us: float
    v_m: np.ndarray          # mV, length n_field + n_tail + 1
    v_rest: float            # mV

    def __post_init__(self):
        v = np.array(self.v_m, dtype=np.float64)
        v.flags.writeable = False
        object.__setattr__(self, "v_m", v)

    @property
    def times_us(self) -> np.ndarray:
        return np.arange(self.v_m.shape[0], dtype=np.float64) * self.dt_us


@dataclass(frozen=True)
class ActivationResult:
    activated: bool
    peak_vm_mV: float
    peak_time_us: float
    margin_mV: float         # peak minus threshold, sign carries the verdict


def rate_values(fn: RateFn, v):
    """Vectorised rate evaluation, singularity-safe for the linoid forms."""
    v = np.asarray(v, dtype=np.float64)
    if fn.kind == "sigmoid":
        return fn.amp / (1.0 + np.exp(-(v - fn.shift) / fn.slope))
    u = (v - fn.shift) / fn.slope if fn.kind == "linoid_up" \
        else (fn.shift - v) / fn.slope
    small = np.abs(u) < 1e-6
    safe = np.where(small, 1.0, u)
    out = fn.amp * fn.slope * safe / (1.0 - np.exp(-safe))
    return np.where(small, fn.amp * fn.slope * (1.0 + 0.5 * u), out)


def _consts(p: NeuronParams) -> np.ndarray:
    return np.array([p.cm_uF_cm2, p.g_leak_mS_cm2, p.e_leak_mV,
                     p.g_naf_mS_cm2, p.e_na_mV, p.g_nap_mS_cm2,
                     p.g_ks_mS_cm2, p.e_k_mV, p.coupling_uA_cm2_per_V_m])


def _kinds(p: NeuronParams) -> np.ndarray:
    return np.array([RATE_KINDS[r.kind] for r in p.rates], dtype=np.int32)


def _coefs(p: NeuronParams) -> np.ndarray:
    return np.array([[r.amp, r.shift, r.slope] for r in p.rates])


def _gate_inf(p: NeuronParams, v):
    """Steady-state gate values at potential v, order m h p s."""
    out = []
    for g in range(4):
        a = rate_values(p.rates[2 * g], v)
        b = rate_values(p.rates[2 * g + 1], v)
        out.append(a / (a + b))
    return out


def _steady_current(p: NeuronParams, v):
    """Total ionic current with gates at steady state (uA/cm^2)."""
    m, h, pg, s = _gate_inf(p, v)
    return (p.g_naf_mS_cm2 * m ** 3 * h * (v - p.e_na_mV)
            + p.g_nap_mS_cm2 * pg ** 3 * (v - p.e_na_mV)
            + p.g_ks_mS_cm2 * s * (v - p.e_k_mV)
            + p.g_leak_mS_cm2 * (v - p.e_leak_mV))


@lru_cache(maxsize=16)
def resting_state(params: NeuronParams) -> tuple:
    """Resting point (v_rest, m, h, p, s).

    Finds zero crossings of the steady-state current on a fine grid and
    keeps the most hyperpolarised one with positive slope, i.e. the stable
    rest point. Raises if the model has none.
    """
    grid = np.arange(-120.0, -40.0, 0.25)
    cur = _steady_current(params, grid)
    v_rest = None
    for i in range(grid.shape[0] - 1):
        if cur[i] == 0.0:
            root = float(grid[i])
        elif cur[i] * cur[i + 1] < 0.0:
            root = brentq(lambda v: float(_steady_current(params, v)),
                          grid[i], grid[i + 1], xtol=1e-12, rtol=8.9e-16)
        else:
            continue
        slope = float(_steady_current(params, root + 1e-4)
                      - _steady_current(params, root - 1e-4))
        if slope > 0.0:
            v_rest = float(root)
            break
    if v_rest is None:
        raise InvalidParamsError("model has no stable resting point in "
                                 "[-120, -40] mV")
    gates = [float(g) for g in _gate_inf(params, v_rest)]
    return (v_rest, *gates)


# Lookup-table grid for the tabulated kernel. The integrator clamps to
# this range, and the divergence guard trips at |v| = 1000 mV, so the
# range must generously cover every non-diverged trajectory.
_TAB_V_LO = -300.0
_TAB_V_HI = 250.0
_TAB_DV = 0.01


@lru_cache(maxsize=8)
def _rate_tables(params: NeuronParams, h_ms: float):
    v = np.arange(_TAB_V_LO, _TAB_V_HI + _TAB_DV / 2, _TAB_DV)
    tab = np.empty((8, v.shape[0]))
    for g in range(4):
        a = rate_values(params.rates[2 * g], v)
        b = rate_values(params.rates[2 * g + 1], v)
        tab[g] = a / (a + b)
        tab[g + 4] = np.exp(-h_ms * (a + b))
    return tab, float(v[0]), _TAB_DV


def simulate(efield, params: NeuronParams = None, dt_us: float = 1.0,
             tail_us: float = 2000.0, substeps: int = 1,
             exact: bool = False) -> MembraneTrace:
    """Membrane response to a sampled field trace plus a zero-field tail.

    ``efield`` gives the field on each grid interval (V/m). ``exact``
    forces per-step rate evaluation instead of the tabulated fast path;
    results differ by well under 0.01 mV.
    """
    params = params or default_params()
    efield = np.ascontiguousarray(efield, dtype=np.float64)
    if efield.ndim != 1:
        raise InvalidParamsError("efield must be one-dimensional")
    if not np.all(np.isfinite(efield)):
        raise InvalidParamsError("efield must be finite")
    if not (dt_us > 0 and math.isfinite(dt_us)):
        raise InvalidParamsError(f"dt_us must be > 0, got {dt_us!r}")
    substeps = int(substeps)
    if substeps < 1:
        raise InvalidParamsError("substeps must be >= 1")
    tail_steps = int(round(tail_us / dt_us))
    if tail_steps < 0:
        raise InvalidParamsError("tail_us must be >= 0")

    state0 = np.array(resting_state(params))
    dt_ms = dt_us * 1e-3
    if exact or not _backend.HAVE_TABULATED:
        vm = _backend.membrane_response(efield, dt_ms, substeps, tail_steps,
                                        _consts(params), _kinds(params),
                                        _coefs(params), state0)
    else:
        tab, v_lo, dv = _rate_tables(params, dt_ms / substeps)
        vm = _backend.membrane_response_tab(efield, dt_ms, substeps,
                                            tail_steps, _consts(params),
                                            tab, v_lo, dv, state0)
    if np.isnan(vm[-1]):
        raise IntegrationFailureError(
            "membrane state diverged; reduce the step or the drive")
    return MembraneTrace(dt_us=dt_us, v_m=vm, v_rest=float(state0[0]))


def simulate_with_peak_grad(efield, params: NeuronParams = None,
                            dt_us: float = 1.0, tail_us: float = 2000.0,
                            substeps: int = 1, beta: float = 2.0,
                            exact: bool = False):
    """Membrane response plus the gradient of its softmax peak.

    Returns ``(trace, grad)`` where ``grad[j]`` is the derivative of the
    softmax peak of the potential trace with respect to ``efield[j]``,
    computed by a reverse sweep through the integrator (cost comparable
    to two plain simulations, independent of the field length). Only the
    compiled backend provides this; callers should consult
    ``_backend.HAVE_GRAD`` and fall back to finite differences without it.
    Divergence raises like ``simulate``.
    """
    if not _backend.HAVE_GRAD:
        raise NotImplementedError(
            "gradient sweeps need the compiled backend")
    params = params or default_params()
    efield = np.ascontiguousarray(efield, dtype=np.float64)
    substeps = int(substeps)
    tail_steps = int(round(tail_us / dt_us))
    state0 = np.array(resting_state(params))
    dt_ms = dt_us * 1e-3
    if exact:
        vm, grad = _backend.membrane_smoothpeak_grad(
            efield, dt_ms, substeps, tail_steps, _consts(params),
            _kinds(params), _coefs(params), state0, beta)
    else:
        tab, v_lo, dv = _rate_tables(params, dt_ms / substeps)
        vm, grad = _backend.membrane_smoothpeak_grad_tab(
            efield, dt_ms, substeps, tail_steps, _consts(params),
            tab, v_lo, dv, state0, beta)
    if np.isnan(vm[-1]):
        raise IntegrationFailureError(
            "membrane state diverged; reduce the step or the drive")
    return MembraneTrace(dt_us=dt_us, v_m=vm, v_rest=float(state0[0])), grad


def check_activation(trace: MembraneTrace,
                     v_threshold: float = 10.0) -> ActivationResult:
    """All-or-none activation test: peak depolarisation strictly above
    threshold anywhere in the trace, tail included."""
    idx = int(np.argmax(trace.v_m))
    peak = float(trace.v_m[idx])
    return ActivationResult(activated=peak > v_threshold, peak_vm_mV=peak,
                            peak_time_us=idx * trace.dt_us,
                            margin_mV=peak - v_threshold)


def titrate_efield(efield, params: NeuronParams = None, dt_us: float = 1.0,
                   tail_us: float = 2000.0, substeps: int = 1,
                   v_threshold: float = 10.0, rel_tol: float = 1e-3,
                   max_scale: float = 1e6, exact: bool = False) -> float:
    """Threshold amplitude scale for a field trace.

    Returns the smallest scale (to ``rel_tol`` relative precision) whose
    scaled trace activates. Scale 1 on return means the trace is at
    threshold already; below 1 it is suprathreshold.
    """
    params = params or default_params()
    efield = np.ascontiguousarray(efield, dtype=np.float64)
    if not np.any(efield != 0.0):
        raise NonExcitableShapeError("field trace is identically zero")

    def active(s):
        tr = simulate(efield * s, params, dt_us=dt_us, tail_us=tail_us,
                      substeps=substeps, exact=exact)
        return check_activation(tr, v_threshold).activated

    if active(1.0):
        hi, lo = 1.0, 0.5
        for _ in range(200):
            if not active(lo):
                break
            hi, lo = lo, lo * 0.5
        else:
            raise TitrationAmbiguousError(
                "activation persists down to vanishing amplitude")
    else:
        lo, hi = 1.0, 2.0
        while not active(hi):
            lo, hi = hi, hi * 2.0
            if hi > max_scale:
                raise NonExcitableShapeError(
                    f"no activation up to scale {max_scale:g}")

    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if active(mid):
            hi = mid
        else:
            lo = mid
    return hi


def titrate_threshold(w, coil=None, params: NeuronParams = None,
                      tail_us: float = 2000.0, substeps: int = 1,
                      v_threshold: float = 10.0, rel_tol: float = 1e-3) -> float:
    """Threshold scale for a spline waveform (samples it, then titrates)."""
    from .waveform import sample
    pulse = sample(w, coil)
    return titrate_efield(pulse.efield, params, dt_us=pulse.dt_us,
                          tail_us=tail_us, substeps=substeps,
                          v_threshold=v_threshold, rel_tol=rel_tol)


def params_to_dict(p: NeuronParams) -> dict:
    return {
        "schema_version": PARAMS_SCHEMA_VERSION,
        "name": p.name,
        "membrane": {
            "cm_uF_cm2": p.cm_uF_cm2,
            "g_leak_mS_cm2": p.g_leak_mS_cm2,
            "e_leak_mV": p.e_leak_mV,
            "g_naf_mS_cm2": p.g_naf_mS_cm2,
            "e_na_mV": p.e_na_mV,
            "g_nap_mS_cm2": p.g_nap_mS_cm2,
            "g_ks_mS_cm2": p.g_ks_mS_cm2,
            "e_k_mV": p.e_k_mV,
        },
        "stimulus_coupling_uA_cm2_per_V_m": p.coupling_uA_cm2_per_V_m,
        "rates": {
            gate: {
                "alpha": dict(p.rates[2 * g]._asdict()),
                "beta": dict(p.rates[2 * g + 1]._asdict()),
            }
            for g, gate in enumerate(GATE_ORDER)
        },
    }


def params_from_dict(d: dict) -> NeuronParams:
    try:
        if int(d.get("schema_version", -1)) != PARAMS_SCHEMA_VERSION:
            raise InvalidParamsError(
                f"unsupported params schema_version {d.get('schema_version')!r}")
        mem = d["membrane"]
        rates = []
        for gate in GATE_ORDER:
            for side in ("alpha", "beta"):
                r = d["rates"][gate][side]
                rates.append(RateFn(r["kind"], float(r["amp"]),
                                    float(r["shift"]), float(r["slope"])))
        return NeuronParams(
            cm_uF_cm2=float(mem["cm_uF_cm2"]),
            g_leak_mS_cm2=float(mem["g_leak_mS_cm2"]),
            e_leak_mV=float(mem["e_leak_mV"]),
            g_naf_mS_cm2=float(mem["g_naf_mS_cm2"]),
            e_na_mV=float(mem["e_na_mV"]),
            g_nap_mS_cm2=float(mem["g_nap_mS_cm2"]),
            g_ks_mS_cm2=float(mem["g_ks_mS_cm2"]),
            e_k_mV=float(mem["e_k_mV"]),
            coupling_uA_cm2_per_V_m=float(
                d["stimulus_coupling_uA_cm2_per_V_m"]),
            rates=tuple(rates),
            name=str(d.get("name", "custom")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidParamsError(f"malformed neuron params: {exc}") from exc


def load_params(path=None) -> NeuronParams:
    """Load neuron parameters from JSON; with no path, the packaged set."""
    if path is None:
        text = resources.files("pulseopt").joinpath(
            "data/neuron_default.json").read_text()
    else:
        with open(path) as f:
            text = f.read()
    return params_from_dict(json.loads(text))


def save_params(p: NeuronParams, path):
    with open(path, "w") as f:
        json.dump(params_to_dict(p), f, indent=2)
        f.write("\n")


@lru_cache(maxsize=1)
def default_params() -> NeuronParams:
    return load_params(None)
