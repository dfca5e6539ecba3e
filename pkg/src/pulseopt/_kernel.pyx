# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numerical kernels.

Two hot paths live here. ``spline_sample_uniform`` interpolates the
natural cubic spline through uniformly spaced knots (tridiagonal solve
plus dense evaluation). ``membrane_response`` integrates the membrane
model with exact rate evaluation, and ``membrane_response_tab`` does the
same with precomputed gate lookup tables, which is the production path
inside optimisation loops.

Rate-kind encoding matches the pure fallback: 0 rising linoid, 1 falling
linoid, 2 sigmoid.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, isfinite, NAN

cnp.import_array()


def spline_sample_uniform(knots, n_out):
    """Natural cubic spline through uniform knots, sampled on a uniform grid.

    Both grids span the same interval, so the computation is carried out on
    the unit interval. Returns a float64 array of length ``n_out``.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.ascontiguousarray(
        knots, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t m = int(n_out)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] m2 = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cp = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dp = np.empty(n, dtype=np.float64)

    cdef double h = 1.0 / (n - 1)
    cdef double h2 = h * h
    cdef Py_ssize_t i, j, k
    cdef double denom, rhs, x, u, a, b

    # Tridiagonal system for interior second derivatives, natural ends.
    # diag 4, off-diagonals 1, rhs 6 * second difference / h^2.
    if n > 2:
        cp[1] = 1.0 / 4.0
        dp[1] = (6.0 * (y[0] - 2.0 * y[1] + y[2]) / h2) / 4.0
        for i in range(2, n - 1):
            denom = 4.0 - cp[i - 1]
            rhs = 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / h2
            cp[i] = 1.0 / denom
            dp[i] = (rhs - dp[i - 1]) / denom
        m2[n - 2] = dp[n - 2]
        for i in range(n - 3, 0, -1):
            m2[i] = dp[i] - cp[i] * m2[i + 1]

    for k in range(m):
        x = <double>k / (m - 1)
        j = <Py_ssize_t>(x / h)
        if j > n - 2:
            j = n - 2
        a = x - h * j          # distance from left knot
        b = h * (j + 1) - x    # distance to right knot
        out[k] = (m2[j] * b * b * b / (6.0 * h)
                  + m2[j + 1] * a * a * a / (6.0 * h)
                  + (y[j] / h - m2[j] * h / 6.0) * b
                  + (y[j + 1] / h - m2[j + 1] * h / 6.0) * a)
    return out


cdef inline double _rate(int kind, double amp, double shift, double slope,
                         double v) nogil:
    cdef double u
    if kind == 2:
        return amp / (1.0 + exp(-(v - shift) / slope))
    if kind == 0:
        u = (v - shift) / slope
    else:
        u = (shift - v) / slope
    if fabs(u) < 1e-6:
        return amp * slope * (1.0 + 0.5 * u)
    return amp * slope * u / (1.0 - exp(-u))


def membrane_response(efield, double dt_ms, int substeps, int tail_steps,
                      consts, gate_kinds, gate_coefs, state0):
    """Exact-rate membrane integration; see the pure fallback for the contract."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] e = np.ascontiguousarray(
        efield, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.ascontiguousarray(
        consts, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] kinds = np.ascontiguousarray(
        gate_kinds, dtype=np.int32).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cf = np.ascontiguousarray(
        gate_coefs, dtype=np.float64).reshape(8, 3)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s0 = np.ascontiguousarray(
        state0, dtype=np.float64)

    cdef double cm = c[0], g_l = c[1], e_l = c[2], g_naf = c[3], e_na = c[4]
    cdef double g_nap = c[5], g_ks = c[6], e_k = c[7], coupling = c[8]

    cdef Py_ssize_t n_field = e.shape[0]
    cdef Py_ssize_t n_steps = n_field + tail_steps
    cdef double h = dt_ms / substeps
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vm = np.empty(
        n_steps + 1, dtype=np.float64)

    cdef double v = s0[0]
    cdef double gates[4]
    cdef double a, b, tau, xinf, i_stim, i_ion
    cdef Py_ssize_t j, sub, g

    gates[0] = s0[1]
    gates[1] = s0[2]
    gates[2] = s0[3]
    gates[3] = s0[4]
    vm[0] = v

    for j in range(n_steps):
        i_stim = coupling * (e[j] if j < n_field else 0.0)
        for sub in range(substeps):
            for g in range(4):
                a = _rate(kinds[2 * g], cf[2 * g, 0], cf[2 * g, 1],
                          cf[2 * g, 2], v)
                b = _rate(kinds[2 * g + 1], cf[2 * g + 1, 0],
                          cf[2 * g + 1, 1], cf[2 * g + 1, 2], v)
                tau = 1.0 / (a + b)
                xinf = a * tau
                gates[g] = xinf + (gates[g] - xinf) * exp(-h / tau)
            i_ion = (g_naf * gates[0] * gates[0] * gates[0] * gates[1]
                     * (v - e_na)
                     + g_nap * gates[2] * gates[2] * gates[2] * (v - e_na)
                     + g_ks * gates[3] * (v - e_k)
                     + g_l * (v - e_l))
            v = v + h / cm * (i_stim - i_ion)
        if not (isfinite(v) and fabs(v) < 1000.0):
            for g in range(<int>(j + 1), <int>(n_steps + 1)):
                vm[g] = NAN
            return vm
        vm[j + 1] = v
    return vm


cdef inline double _rate_deriv(int kind, double amp, double shift,
                               double slope, double v) nogil:
    """d/dv of ``_rate``; the linoid Taylor guard matches the forward one."""
    cdef double u, eu, den, gp
    if kind == 2:
        u = (v - shift) / slope
        eu = exp(-u)
        den = 1.0 + eu
        return amp * eu / (slope * den * den)
    if kind == 0:
        u = (v - shift) / slope
    else:
        u = (shift - v) / slope
    if fabs(u) < 1e-6:
        gp = 0.5 + u / 6.0
    else:
        eu = exp(-u)
        den = 1.0 - eu
        gp = (den - u * eu) / (den * den)
    if kind == 0:
        return amp * gp
    return -amp * gp


def membrane_smoothpeak_grad(efield, double dt_ms, int substeps,
                             int tail_steps, consts, gate_kinds, gate_coefs,
                             state0, double beta):
    """Exact-rate integration plus reverse-mode gradient.

    Returns ``(vm, grad)`` where ``grad[j]`` is the derivative of the
    softmax peak ``max(vm) + log(sum(exp(beta * (vm - max)))) / beta``
    with respect to ``efield[j]``. The forward pass stores the state at
    every substep; the backward sweep recomputes gate quantities from the
    stored state, so one call costs roughly two plain integrations. On
    divergence the trace carries the NaN fill and the gradient is zero.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] e = np.ascontiguousarray(
        efield, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.ascontiguousarray(
        consts, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] kinds = np.ascontiguousarray(
        gate_kinds, dtype=np.int32).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cf = np.ascontiguousarray(
        gate_coefs, dtype=np.float64).reshape(8, 3)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s0 = np.ascontiguousarray(
        state0, dtype=np.float64)

    cdef double cm = c[0], g_l = c[1], e_l = c[2], g_naf = c[3], e_na = c[4]
    cdef double g_nap = c[5], g_ks = c[6], e_k = c[7], coupling = c[8]

    cdef Py_ssize_t n_field = e.shape[0]
    cdef Py_ssize_t n_steps = n_field + tail_steps
    cdef Py_ssize_t n_sub = n_steps * substeps
    cdef double h = dt_ms / substeps
    cdef double k_stim = h / cm
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vm = np.empty(
        n_steps + 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] grad = np.zeros(
        n_field, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vs = np.empty(
        n_sub, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gstore = np.empty(
        (n_sub, 4), dtype=np.float64)

    cdef double v = s0[0]
    cdef double gates[4]
    cdef double a, b, tau, xinf, i_stim, i_ion
    cdef Py_ssize_t j, sub, g, t

    gates[0] = s0[1]
    gates[1] = s0[2]
    gates[2] = s0[3]
    gates[3] = s0[4]
    vm[0] = v

    for j in range(n_steps):
        i_stim = coupling * (e[j] if j < n_field else 0.0)
        for sub in range(substeps):
            t = j * substeps + sub
            vs[t] = v
            gstore[t, 0] = gates[0]
            gstore[t, 1] = gates[1]
            gstore[t, 2] = gates[2]
            gstore[t, 3] = gates[3]
            for g in range(4):
                a = _rate(kinds[2 * g], cf[2 * g, 0], cf[2 * g, 1],
                          cf[2 * g, 2], v)
                b = _rate(kinds[2 * g + 1], cf[2 * g + 1, 0],
                          cf[2 * g + 1, 1], cf[2 * g + 1, 2], v)
                tau = 1.0 / (a + b)
                xinf = a * tau
                gates[g] = xinf + (gates[g] - xinf) * exp(-h / tau)
            i_ion = (g_naf * gates[0] * gates[0] * gates[0] * gates[1]
                     * (v - e_na)
                     + g_nap * gates[2] * gates[2] * gates[2] * (v - e_na)
                     + g_ks * gates[3] * (v - e_k)
                     + g_l * (v - e_l))
            v = v + h / cm * (i_stim - i_ion)
        if not (isfinite(v) and fabs(v) < 1000.0):
            for g in range(<int>(j + 1), <int>(n_steps + 1)):
                vm[g] = NAN
            return vm, grad
        vm[j + 1] = v

    # softmax weights of the recorded samples
    cdef double vmax = vm[0]
    for j in range(1, n_steps + 1):
        if vm[j] > vmax:
            vmax = vm[j]
    cdef double sumexp = 0.0
    for j in range(n_steps + 1):
        sumexp += exp(beta * (vm[j] - vmax))

    cdef double lv = 0.0, lv_mid
    cdef double lg[4]
    cdef double ap, bp, da, db, ssum, dxinf, dedec, edec, x_pre, lgp
    cdef double mneu, hneu, pneu, sneu, di_dv
    for g in range(4):
        lg[g] = 0.0

    for j in range(n_steps - 1, -1, -1):
        lv += exp(beta * (vm[j + 1] - vmax)) / sumexp
        for sub in range(substeps - 1, -1, -1):
            t = j * substeps + sub
            v = vs[t]
            # recompute the updated gates and their local derivatives
            mneu = hneu = pneu = sneu = 0.0
            lv_mid = 0.0
            for g in range(4):
                a = _rate(kinds[2 * g], cf[2 * g, 0], cf[2 * g, 1],
                          cf[2 * g, 2], v)
                b = _rate(kinds[2 * g + 1], cf[2 * g + 1, 0],
                          cf[2 * g + 1, 1], cf[2 * g + 1, 2], v)
                da = _rate_deriv(kinds[2 * g], cf[2 * g, 0], cf[2 * g, 1],
                                 cf[2 * g, 2], v)
                db = _rate_deriv(kinds[2 * g + 1], cf[2 * g + 1, 0],
                                 cf[2 * g + 1, 1], cf[2 * g + 1, 2], v)
                tau = 1.0 / (a + b)
                xinf = a * tau
                edec = exp(-h / tau)
                dxinf = (da * b - a * db) * tau * tau
                dedec = -h * (da + db) * edec
                x_pre = gstore[t, g]
                gates[g] = xinf + (x_pre - xinf) * edec
                # stash the v-sensitivity of this gate update in lg slot
                # after using the incoming adjoint; done below once the
                # updated gate values are known
                if g == 0:
                    mneu = dxinf * (1.0 - edec) + (x_pre - xinf) * dedec
                elif g == 1:
                    hneu = dxinf * (1.0 - edec) + (x_pre - xinf) * dedec
                elif g == 2:
                    pneu = dxinf * (1.0 - edec) + (x_pre - xinf) * dedec
                else:
                    sneu = dxinf * (1.0 - edec) + (x_pre - xinf) * dedec
                gstore[t, g] = edec   # reuse storage: decay factor for below
            # reverse of the v update
            di_dv = (g_naf * gates[0] * gates[0] * gates[0] * gates[1]
                     + g_nap * gates[2] * gates[2] * gates[2]
                     + g_ks * gates[3] + g_l)
            lg[0] += lv * (-k_stim * g_naf * 3.0 * gates[0] * gates[0]
                           * gates[1] * (v - e_na))
            lg[1] += lv * (-k_stim * g_naf * gates[0] * gates[0] * gates[0]
                           * (v - e_na))
            lg[2] += lv * (-k_stim * g_nap * 3.0 * gates[2] * gates[2]
                           * (v - e_na))
            lg[3] += lv * (-k_stim * g_ks * (v - e_k))
            if j < n_field:
                grad[j] += lv * k_stim * coupling
            lv_mid = lv * (1.0 - k_stim * di_dv)
            # reverse of the gate updates
            lv_mid += lg[0] * mneu + lg[1] * hneu + lg[2] * pneu \
                + lg[3] * sneu
            for g in range(4):
                lg[g] = lg[g] * gstore[t, g]
            lv = lv_mid
    return vm, grad


def membrane_smoothpeak_grad_tab(efield, double dt_ms, int substeps,
                                 int tail_steps, consts, tables,
                                 double v_lo, double dv, state0, double beta):
    """Tabulated variant of ``membrane_smoothpeak_grad``.

    Gate steady states and decay factors come from the lookup tables; the
    backward sweep uses the interpolation-cell slopes as their
    derivatives (zero where the lookup clamps).
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] e = np.ascontiguousarray(
        efield, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.ascontiguousarray(
        consts, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] tab = np.ascontiguousarray(
        tables, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s0 = np.ascontiguousarray(
        state0, dtype=np.float64)

    cdef double cm = c[0], g_l = c[1], e_l = c[2], g_naf = c[3], e_na = c[4]
    cdef double g_nap = c[5], g_ks = c[6], e_k = c[7], coupling = c[8]

    cdef Py_ssize_t n_field = e.shape[0]
    cdef Py_ssize_t n_steps = n_field + tail_steps
    cdef Py_ssize_t n_sub = n_steps * substeps
    cdef Py_ssize_t n_v = tab.shape[1]
    cdef double h = dt_ms / substeps
    cdef double k_stim = h / cm
    cdef double dv_inv = 1.0 / dv
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vm = np.empty(
        n_steps + 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] grad = np.zeros(
        n_field, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vs = np.empty(
        n_sub, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gstore = np.empty(
        (n_sub, 4), dtype=np.float64)

    cdef double v = s0[0]
    cdef double gates[4]
    cdef double xinf, edec, i_stim, i_ion, pos, frac
    cdef Py_ssize_t j, sub, g, idx, t
    cdef bint clamped

    gates[0] = s0[1]
    gates[1] = s0[2]
    gates[2] = s0[3]
    gates[3] = s0[4]
    vm[0] = v

    for j in range(n_steps):
        i_stim = coupling * (e[j] if j < n_field else 0.0)
        for sub in range(substeps):
            t = j * substeps + sub
            vs[t] = v
            gstore[t, 0] = gates[0]
            gstore[t, 1] = gates[1]
            gstore[t, 2] = gates[2]
            gstore[t, 3] = gates[3]
            pos = (v - v_lo) * dv_inv
            if pos < 0.0:
                pos = 0.0
            elif pos > n_v - 1.000001:
                pos = n_v - 1.000001
            idx = <Py_ssize_t>pos
            frac = pos - idx
            for g in range(4):
                xinf = tab[g, idx] + frac * (tab[g, idx + 1] - tab[g, idx])
                edec = tab[g + 4, idx] + frac * (tab[g + 4, idx + 1]
                                                 - tab[g + 4, idx])
                gates[g] = xinf + (gates[g] - xinf) * edec
            i_ion = (g_naf * gates[0] * gates[0] * gates[0] * gates[1]
                     * (v - e_na)
                     + g_nap * gates[2] * gates[2] * gates[2] * (v - e_na)
                     + g_ks * gates[3] * (v - e_k)
                     + g_l * (v - e_l))
            v = v + h / cm * (i_stim - i_ion)
        if not (isfinite(v) and fabs(v) < 1000.0):
            for g in range(<int>(j + 1), <int>(n_steps + 1)):
                vm[g] = NAN
            return vm, grad
        vm[j + 1] = v

    cdef double vmax = vm[0]
    for j in range(1, n_steps + 1):
        if vm[j] > vmax:
            vmax = vm[j]
    cdef double sumexp = 0.0
    for j in range(n_steps + 1):
        sumexp += exp(beta * (vm[j] - vmax))

    cdef double lv = 0.0, lv_mid
    cdef double lg[4]
    cdef double dxinf, dedec, x_pre
    cdef double mneu, hneu, pneu, sneu, di_dv
    for g in range(4):
        lg[g] = 0.0

    for j in range(n_steps - 1, -1, -1):
        lv += exp(beta * (vm[j + 1] - vmax)) / sumexp
        for sub in range(substeps - 1, -1, -1):
            t = j * substeps + sub
            v = vs[t]
            pos = (v - v_lo) * dv_inv
            clamped = False
            if pos < 0.0:
                pos = 0.0
                clamped = True
            elif pos > n_v - 1.000001:
                pos = n_v - 1.000001
                clamped = True
            idx = <Py_ssize_t>pos
            frac = pos - idx
            mneu = hneu = pneu = sneu = 0.0
            for g in range(4):
                xinf = tab[g, idx] + frac * (tab[g, idx + 1] - tab[g, idx])
                edec = tab[g + 4, idx] + frac * (tab[g + 4, idx + 1]
                                                 - tab[g + 4, idx])
                if clamped:
                    dxinf = 0.0
                    dedec = 0.0
                else:
                    dxinf = (tab[g, idx + 1] - tab[g, idx]) * dv_inv
                    dedec = (tab[g + 4, idx + 1] - tab[g + 4, idx]) * dv_inv
                x_pre = gstore[t, g]
                gates[g] = xinf + (x_pre - xinf) * edec
                if g == 0:
                    mneu = dxinf * (1.0 - edec) + (x_pre - xinf) * dedec
                elif g == 1:
                    hneu = dxinf * (1.0 - edec) + (x_pre - xinf) * dedec
                elif g == 2:
                    pneu = dxinf * (1.0 - edec) + (x_pre - xinf) * dedec
                else:
                    sneu = dxinf * (1.0 - edec) + (x_pre - xinf) * dedec
                gstore[t, g] = edec
            di_dv = (g_naf * gates[0] * gates[0] * gates[0] * gates[1]
                     + g_nap * gates[2] * gates[2] * gates[2]
                     + g_ks * gates[3] + g_l)
            lg[0] += lv * (-k_stim * g_naf * 3.0 * gates[0] * gates[0]
                           * gates[1] * (v - e_na))
            lg[1] += lv * (-k_stim * g_naf * gates[0] * gates[0] * gates[0]
                           * (v - e_na))
            lg[2] += lv * (-k_stim * g_nap * 3.0 * gates[2] * gates[2]
                           * (v - e_na))
            lg[3] += lv * (-k_stim * g_ks * (v - e_k))
            if j < n_field:
                grad[j] += lv * k_stim * coupling
            lv_mid = lv * (1.0 - k_stim * di_dv)
            lv_mid += lg[0] * mneu + lg[1] * hneu + lg[2] * pneu \
                + lg[3] * sneu
            for g in range(4):
                lg[g] = lg[g] * gstore[t, g]
            lv = lv_mid
    return vm, grad


def membrane_response_tab(efield, double dt_ms, int substeps, int tail_steps,
                          consts, tables, double v_lo, double dv, state0):
    """Tabulated-rate membrane integration.

    ``tables`` is (8, NV): rows 0..3 steady-state values for m h p s, rows
    4..7 the matching per-substep decay factors exp(-h / tau), sampled on
    the uniform grid v_lo + i * dv. Lookups clamp to the table range, so
    the grid must comfortably cover the reachable potentials.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] e = np.ascontiguousarray(
        efield, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.ascontiguousarray(
        consts, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] tab = np.ascontiguousarray(
        tables, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s0 = np.ascontiguousarray(
        state0, dtype=np.float64)

    cdef double cm = c[0], g_l = c[1], e_l = c[2], g_naf = c[3], e_na = c[4]
    cdef double g_nap = c[5], g_ks = c[6], e_k = c[7], coupling = c[8]

    cdef Py_ssize_t n_field = e.shape[0]
    cdef Py_ssize_t n_steps = n_field + tail_steps
    cdef Py_ssize_t n_v = tab.shape[1]
    cdef double h = dt_ms / substeps
    cdef double dv_inv = 1.0 / dv
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vm = np.empty(
        n_steps + 1, dtype=np.float64)

    cdef double v = s0[0]
    cdef double gates[4]
    cdef double xinf, edec, i_stim, i_ion, pos, frac
    cdef Py_ssize_t j, sub, g, idx

    gates[0] = s0[1]
    gates[1] = s0[2]
    gates[2] = s0[3]
    gates[3] = s0[4]
    vm[0] = v

    for j in range(n_steps):
        i_stim = coupling * (e[j] if j < n_field else 0.0)
        for sub in range(substeps):
            pos = (v - v_lo) * dv_inv
            if pos < 0.0:
                pos = 0.0
            elif pos > n_v - 1.000001:
                pos = n_v - 1.000001
            idx = <Py_ssize_t>pos
            frac = pos - idx
            for g in range(4):
                xinf = tab[g, idx] + frac * (tab[g, idx + 1] - tab[g, idx])
                edec = tab[g + 4, idx] + frac * (tab[g + 4, idx + 1]
                                                 - tab[g + 4, idx])
                gates[g] = xinf + (gates[g] - xinf) * edec
            i_ion = (g_naf * gates[0] * gates[0] * gates[0] * gates[1]
                     * (v - e_na)
                     + g_nap * gates[2] * gates[2] * gates[2] * (v - e_na)
                     + g_ks * gates[3] * (v - e_k)
                     + g_l * (v - e_l))
            v = v + h / cm * (i_stim - i_ion)
        if not (isfinite(v) and fabs(v) < 1000.0):
            for g in range(<int>(j + 1), <int>(n_steps + 1)):
                vm[g] = NAN
            return vm
        vm[j + 1] = v
    return vm
