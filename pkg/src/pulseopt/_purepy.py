"""Pure NumPy/SciPy fallback for the compiled numerical kernel.

Provides the same entry points as the Cython extension so the rest of the
package can run without a C toolchain. The membrane integrator here
evaluates the gating rate functions exactly at every substep, which makes
it the reference implementation that the fast tabulated kernel is checked
against.

Rate-function kinds (shared encoding with the compiled kernel):
  0  linoid, rising:   amp * (v - shift) / (1 - exp(-(v - shift) / slope))
  1  linoid, falling:  amp * (shift - v) / (1 - exp(-(shift - v) / slope))
  2  sigmoid:          amp / (1 + exp(-(v - shift) / slope))
"""

import math

import numpy as np
from scipy.interpolate import CubicSpline

BACKEND_NAME = "pure-python"


def spline_sample_uniform(knots, n_out):
    """Evaluate the natural cubic spline through uniformly spaced knots.

    Knot abscissae and output abscissae are both uniform over the same
    span, so only the values are needed.
    """
    knots = np.ascontiguousarray(knots, dtype=np.float64)
    x_knot = np.linspace(0.0, 1.0, knots.shape[0])
    x_out = np.linspace(0.0, 1.0, int(n_out))
    return CubicSpline(x_knot, knots, bc_type="natural")(x_out)


def _rate(kind, amp, shift, slope, v):
    # Scalar rate evaluation with the removable singularity of the linoid
    # forms handled by a series expansion near u = 0.
    if kind == 2:
        return amp / (1.0 + math.exp(-(v - shift) / slope))
    if kind == 0:
        u = (v - shift) / slope
    else:
        u = (shift - v) / slope
    if abs(u) < 1e-6:
        return amp * slope * (1.0 + 0.5 * u)
    return amp * slope * u / (1.0 - math.exp(-u))


def membrane_response(efield, dt_ms, substeps, tail_steps, consts,
                      gate_kinds, gate_coefs, state0):
    """Integrate the membrane model along a uniformly sampled field trace.

    efield      : (K,) electric field per step interval (V/m)
    dt_ms       : step of the field trace (ms)
    substeps    : integration substeps per field step
    tail_steps  : zero-field steps appended after the trace
    consts      : (9,) cm, g_leak, e_leak, g_naf, e_na, g_nap, g_ks, e_k,
                  stimulus coupling ((uA/cm^2) per (V/m))
    gate_kinds  : (8,) int rate kinds, order am bm ah bh ap bp as bs
    gate_coefs  : (8, 3) amp shift slope, temperature factors already folded
                  into amp
    state0      : (5,) v_m (mV) then gates m h p s

    Gates advance by exponential Euler, the potential by forward Euler.
    Returns the membrane potential at every step node, length
    K + tail_steps + 1. On numerical divergence the remaining nodes are
    NaN; callers decide how to report that.
    """
    efield = np.asarray(efield, dtype=np.float64)
    cm, g_l, e_l, g_naf, e_na, g_nap, g_ks, e_k, coupling = [
        float(c) for c in consts]
    kinds = [int(k) for k in np.asarray(gate_kinds).ravel()]
    coefs = np.asarray(gate_coefs, dtype=np.float64).reshape(8, 3)

    n_steps = efield.shape[0] + int(tail_steps)
    h = dt_ms / substeps
    vm = np.empty(n_steps + 1, dtype=np.float64)

    v = float(state0[0])
    m, hg, p, s = (float(state0[1]), float(state0[2]),
                   float(state0[3]), float(state0[4]))
    vm[0] = v

    for j in range(n_steps):
        e_now = efield[j] if j < efield.shape[0] else 0.0
        i_stim = coupling * e_now
        for _ in range(substeps):
            gates = [m, hg, p, s]
            for g in range(4):
                a = _rate(kinds[2 * g], coefs[2 * g, 0],
                          coefs[2 * g, 1], coefs[2 * g, 2], v)
                b = _rate(kinds[2 * g + 1], coefs[2 * g + 1, 0],
                          coefs[2 * g + 1, 1], coefs[2 * g + 1, 2], v)
                tau = 1.0 / (a + b)
                xinf = a * tau
                gates[g] = xinf + (gates[g] - xinf) * math.exp(-h / tau)
            m, hg, p, s = gates
            i_ion = (g_naf * m * m * m * hg * (v - e_na)
                     + g_nap * p * p * p * (v - e_na)
                     + g_ks * s * (v - e_k)
                     + g_l * (v - e_l))
            v = v + h / cm * (i_stim - i_ion)
        if not (math.isfinite(v) and abs(v) < 1000.0):
            vm[j + 1:] = math.nan
            return vm
        vm[j + 1] = v
    return vm
