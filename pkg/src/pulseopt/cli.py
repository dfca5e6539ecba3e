"""Command-line interface.

Subcommands cover the full workflow: ``optimize`` runs the manifest of
voltage-limit conditions and writes one JSON result plus one waveform CSV
per run, ``titrate`` prints the threshold scale of a waveform, ``analyze``
extracts shape metrics to CSV, ``compare`` prints the relative energy
difference and correlation of two waveforms, and ``filter`` low-passes a
waveform.

Result JSON files separate a deterministic ``payload`` (identical bytes
for identical manifest and seed) from a ``meta`` block with timestamps
and environment notes.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, analysis, neuron, preprocess
from ._backend import BACKEND
from .errors import ManifestError, PulseOptError
from .objective import ObjectiveConfig
from .optimizer import OptimizationRun, SwarmConfig, run_optimization
from .waveform import (CoilParams, VoltageLimits, read_waveform_csv, sample,
                       write_waveform_csv)

logger = logging.getLogger(__name__)

RESULT_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1

BUDGETS = {
    "desk": {},
    "paper": {"n_particles": 20, "max_iterations": 150, "local_budget": 12000},
}


def _load_manifest(path):
    try:
        with open(path) as f:
            man = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    if int(man.get("schema_version", -1)) != MANIFEST_SCHEMA_VERSION:
        raise ManifestError(
            f"unsupported manifest schema_version {man.get('schema_version')!r}")
    if not isinstance(man.get("conditions"), list) or not man["conditions"]:
        raise ManifestError("manifest needs a non-empty conditions list")
    return man


def _swarm_config(man, budget):
    base = dict(BUDGETS[budget])
    base.update(man.get("swarm", {}))
    try:
        return SwarmConfig(**base)
    except TypeError as exc:
        raise ManifestError(f"bad swarm settings: {exc}") from exc


def _coil(man):
    return CoilParams(**man.get("coil", {}))


def verification_block(run: OptimizationRun) -> dict:
    """Re-check the returned best waveform with the exact-rate integrator,
    independently of the fast path used during optimisation."""
    cfg = run.objective
    pulse = sample(run.best_waveform, cfg.coil)
    trace = neuron.simulate(pulse.efield, cfg.neuron_params,
                            dt_us=pulse.dt_us, tail_us=cfg.tail_us,
                            substeps=cfg.substeps, exact=True)
    act = neuron.check_activation(trace, cfg.v_threshold_mV)
    from .objective import penalty_integral
    from .waveform import energy_loss
    return {
        "activated": bool(act.activated),
        "peak_vm_mV": act.peak_vm_mV,
        "v_max_obs_V": float(np.max(pulse.voltage)),
        "v_min_obs_V": float(np.min(pulse.voltage)),
        "penalty_Vs": penalty_integral(pulse, cfg.limits),
        "energy_J": energy_loss(pulse),
    }


def run_payload(run: OptimizationRun, name: str, seed: int) -> dict:
    cb = run.best_cost
    return {
        "schema_version": RESULT_SCHEMA_VERSION,
        "condition": {"name": name,
                      "v_max_V": run.objective.limits.v_max,
                      "v_min_V": run.objective.limits.v_min},
        "seed": seed,
        "window_ms": run.best_waveform.window_ms,
        "coil": asdict(run.objective.coil),
        "objective": {
            "lam_S_per_s": run.objective.lam_S_per_s,
            "v_threshold_mV": run.objective.v_threshold_mV,
            "softmax_beta": run.objective.softmax_beta,
            "tail_us": run.objective.tail_us,
            "substeps": run.objective.substeps,
        },
        "swarm": asdict(run.swarm),
        "best": {
            "n_dof": run.best_waveform.n_dof,
            "knots_A": [float(k) for k in run.best_waveform.knots],
            "cost": asdict(cb),
        },
        "history": [asdict(h) for h in run.history],
        "n_evaluations": run.n_evaluations,
        "terminated": run.terminated,
        "verification": verification_block(run),
    }


def result_document(payload: dict, wall_time_s: float) -> dict:
    return {
        "meta": {
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "tool": f"pulseopt {__version__}",
            "backend": BACKEND,
            "wall_time_s": wall_time_s,
        },
        "payload": payload,
    }


def payload_bytes(payload: dict) -> bytes:
    """Canonical byte serialisation used for determinism checks."""
    return json.dumps(payload, sort_keys=True,
                      separators=(",", ":")).encode()


def _cmd_optimize(args):
    man = _load_manifest(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    swarm = _swarm_config(man, args.budget)
    coil = _coil(man)
    window_ms = float(man.get("window_ms", 3.0))
    nparams = (neuron.load_params(man["neuron_params"])
               if man.get("neuron_params") else None)

    metrics_rows = []
    for idx, cond in enumerate(man["conditions"]):
        try:
            limits = VoltageLimits(float(cond["v_max_V"]),
                                   float(cond["v_min_V"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"bad condition #{idx}: {exc}") from exc
        name = str(cond.get("name",
                            f"vp{cond['v_max_V']:g}_vn{-cond['v_min_V']:g}"))
        repeats = int(cond.get("repeats", 1))
        base_seed = int(cond.get("seed", 1000 + idx))
        cfg = ObjectiveConfig(limits=limits, coil=coil,
                              neuron_params=nparams)
        for rep in range(repeats):
            seed = base_seed + rep
            scfg = SwarmConfig(**{**asdict(swarm), "seed": seed})
            logger.info("condition %s repeat %d seed %d", name, rep, seed)
            run = run_optimization(cfg, scfg, window_ms=window_ms)
            payload = run_payload(run, name, seed)
            doc = result_document(payload, run.wall_time_s)
            stem = f"{name}__r{rep}"
            with open(out_dir / f"{stem}.json", "w") as f:
                json.dump(doc, f, indent=2, sort_keys=True)
                f.write("\n")
            pulse = sample(run.best_waveform, coil)
            write_waveform_csv(out_dir / f"{stem}.csv", pulse)
            try:
                metrics_rows.append(
                    analysis.metrics_from_pulse(pulse, limits))
            except PulseOptError as exc:
                logger.warning("metrics skipped for %s: %s", stem, exc)
    analysis.write_metrics_csv(out_dir / "metrics.csv", metrics_rows)
    return 0


def _cmd_titrate(args):
    pulse = read_waveform_csv(args.infile)
    nparams = neuron.load_params(args.params) if args.params else None
    scale = neuron.titrate_efield(pulse.efield, nparams, dt_us=pulse.dt_us,
                                  rel_tol=args.rel_tol)
    print(f"{scale:.6g}")
    return 0


def _cmd_analyze(args):
    pulse = read_waveform_csv(args.infile)
    row = analysis.metrics_from_pulse(pulse)
    analysis.write_metrics_csv(args.out, [row])
    return 0


def _cmd_compare(args):
    test = read_waveform_csv(args.test)
    ref = read_waveform_csv(args.ref)
    nparams = neuron.load_params(args.params) if args.params else None
    eta = analysis.compare_losses(test, ref, mode=args.mode,
                                  neuron_params=nparams)
    corr = analysis.waveform_correlation(test, ref)
    print(json.dumps({"eta_percent": eta, "correlation_r": corr}))
    return 0


def _cmd_filter(args):
    pulse = read_waveform_csv(args.infile)
    out = preprocess.filter_pulse(pulse, cutoff_hz=args.cutoff_hz)
    write_waveform_csv(args.out, out)
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="pulseopt",
        description="energy-minimal coil pulse synthesis and analysis")
    p.add_argument("--verbose", "-v", action="store_true",
                   help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("optimize", help="run a manifest of conditions")
    q.add_argument("--manifest", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--budget", choices=sorted(BUDGETS), default="desk")
    q.set_defaults(func=_cmd_optimize)

    q = sub.add_parser("titrate", help="print the threshold scale")
    q.add_argument("--in", dest="infile", required=True)
    q.add_argument("--params", default=None)
    q.add_argument("--rel-tol", type=float, default=1e-3)
    q.set_defaults(func=_cmd_titrate)

    q = sub.add_parser("analyze", help="extract shape metrics to CSV")
    q.add_argument("--in", dest="infile", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_analyze)

    q = sub.add_parser("compare", help="relative energy loss of two pulses")
    q.add_argument("--test", required=True)
    q.add_argument("--ref", required=True)
    q.add_argument("--mode", choices=("peak", "threshold"), default="peak")
    q.add_argument("--params", default=None)
    q.set_defaults(func=_cmd_compare)

    q = sub.add_parser("filter", help="low-pass a waveform CSV")
    q.add_argument("--in", dest="infile", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--cutoff-hz", type=float, default=200e3)
    q.set_defaults(func=_cmd_filter)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except PulseOptError as exc:
        json.dump({"error": exc.kind, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
