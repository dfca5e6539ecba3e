"""Timing comparison of the numerical backends.

Runs the hot kernels through every available implementation (pure
NumPy/SciPy fallback, compiled exact-rate, compiled tabulated) plus the
fused response-and-gradient sweep, and prints one table. Usage:

    python3 benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from pulseopt import _backend, _purepy
from pulseopt.neuron import (_coefs, _consts, _kinds, _rate_tables,
                             default_params, resting_state)

M = 3000          # field samples (3 ms window at 1 us)
TAIL = 2000       # zero-field tail steps
N_KNOTS = 60


def timed(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    knots = rng.normal(0.0, 300.0, N_KNOTS)
    t = np.arange(M, dtype=np.float64)
    efield = 30.0 * np.exp(-0.5 * ((t - 900.0) / 150.0) ** 2) \
        - 6.0 * np.exp(-0.5 * ((t - 400.0) / 250.0) ** 2)

    p = default_params()
    consts, kinds, coefs = _consts(p), _kinds(p), _coefs(p)
    state0 = np.array(resting_state(p))
    tab, v_lo, dv = _rate_tables(p, 1e-3)

    impls = _backend.implementations()
    have_compiled = "compiled" in impls
    rows = []

    def add(name, seconds, baseline=None):
        speed = "" if baseline is None or seconds == 0 \
            else f"{baseline / seconds:7.1f}x"
        rows.append((name, f"{seconds * 1e3:10.3f} ms", speed))

    t_sp_py = timed(lambda: _purepy.spline_sample_uniform(knots, M + 1),
                    args.repeats)
    add("spline  pure-python", t_sp_py)
    if have_compiled:
        k = impls["compiled"]
        add("spline  compiled",
            timed(lambda: k.spline_sample_uniform(knots, M + 1),
                  args.repeats), t_sp_py)

    t_mem_py = timed(
        lambda: _purepy.membrane_response(efield, 1e-3, 1, TAIL, consts,
                                          kinds, coefs, state0.copy()),
        args.repeats)
    add("membrane  pure-python", t_mem_py)
    if have_compiled:
        k = impls["compiled"]
        add("membrane  compiled exact",
            timed(lambda: k.membrane_response(efield, 1e-3, 1, TAIL, consts,
                                              kinds, coefs, state0.copy()),
                  args.repeats), t_mem_py)
        t_tab = timed(
            lambda: k.membrane_response_tab(efield, 1e-3, 1, TAIL, consts,
                                            tab, v_lo, dv, state0.copy()),
            args.repeats)
        add("membrane  compiled tabulated", t_tab, t_mem_py)

        t_grad = timed(
            lambda: k.membrane_smoothpeak_grad_tab(
                efield, 1e-3, 1, TAIL, consts, tab, v_lo, dv,
                state0.copy(), 2.0),
            args.repeats)
        # what a central-difference gradient costs on the same grid
        t_fd = (2 * N_KNOTS + 1) * t_tab
        add(f"peak gradient  central differences ({N_KNOTS} knots)", t_fd)
        add("peak gradient  fused reverse sweep", t_grad, t_fd)

    print(f"backend selected at import: {_backend.BACKEND}")
    print(f"{'kernel':<48}{'best time':>14}  speedup")
    for name, tm, speed in rows:
        print(f"{name:<48}{tm:>14}  {speed}")


if __name__ == "__main__":
    main()
