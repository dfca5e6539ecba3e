"""Command-line interface: manifest runs, determinism, tool subcommands."""

import json
import math

import numpy as np
import pytest

from pulseopt import cli
from pulseopt.analysis import read_metrics_csv
from pulseopt.pulses import ReferencePulseSpec, synthesize
from pulseopt.waveform import read_waveform_csv, write_waveform_csv

MICRO_SWARM = {"n_particles": 2, "max_iterations": 2, "local_budget": 250,
               "dof_init_lo": 25, "dof_init_hi": 40}


def _write_manifest(path, seed=11):
    man = {
        "schema_version": 1,
        "window_ms": 3.0,
        "swarm": MICRO_SWARM,
        "conditions": [
            {"name": "demo", "v_max_V": 1000.0, "v_min_V": -1000.0,
             "seed": seed},
        ],
    }
    path.write_text(json.dumps(man))
    return path


@pytest.fixture(scope="module")
def optimize_runs(tmp_path_factory):
    """Two identical manifest runs in separate directories."""
    root = tmp_path_factory.mktemp("cliopt")
    man = _write_manifest(root / "manifest.json")
    dirs = []
    for tag in ("a", "b"):
        out = root / tag
        rc = cli.main(["optimize", "--manifest", str(man), "--out", str(out)])
        assert rc == 0
        dirs.append(out)
    return dirs


class TestOptimize:
    def test_outputs_exist_and_verify(self, optimize_runs):
        out = optimize_runs[0]
        doc = json.loads((out / "demo__r0.json").read_text())
        assert set(doc) == {"meta", "payload"}
        pay = doc["payload"]
        assert pay["schema_version"] == cli.RESULT_SCHEMA_VERSION
        assert pay["condition"] == {"name": "demo", "v_max_V": 1000.0,
                                    "v_min_V": -1000.0}
        assert pay["best"]["n_dof"] == len(pay["best"]["knots_A"])
        assert pay["best"]["cost"]["feasible"] is True
        ver = pay["verification"]
        assert ver["activated"] is True
        assert ver["penalty_Vs"] <= 1e-9
        assert ver["v_max_obs_V"] <= 1000.0 + 1.0
        assert ver["v_min_obs_V"] >= -1000.0 - 1.0
        assert ver["energy_J"] > 0.0

        pulse = read_waveform_csv(out / "demo__r0.csv")
        assert pulse.current.shape == (3001,)
        rows = read_metrics_csv(out / "metrics.csv")
        assert len(rows) == 1 and rows[0].energy_J > 0.0

    def test_payload_bytes_reproducible(self, optimize_runs):
        pays = [json.loads((d / "demo__r0.json").read_text())["payload"]
                for d in optimize_runs]
        assert cli.payload_bytes(pays[0]) == cli.payload_bytes(pays[1])

    def test_meta_is_separate(self, optimize_runs):
        doc = json.loads((optimize_runs[0] / "demo__r0.json").read_text())
        assert "created_utc" in doc["meta"]
        assert "backend" in doc["meta"]
        assert "created_utc" not in doc["payload"]

    def test_bad_manifest_is_reported(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"schema_version": 99, "conditions": []}))
        rc = cli.main(["optimize", "--manifest", str(bad),
                       "--out", str(tmp_path / "o")])
        assert rc == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "manifest"

    def test_missing_manifest_is_reported(self, tmp_path, capsys):
        rc = cli.main(["optimize", "--manifest", str(tmp_path / "nope.json"),
                       "--out", str(tmp_path / "o")])
        assert rc == 2
        assert json.loads(capsys.readouterr().err)["error"] == "manifest"


class TestTools:
    def _csv_of(self, tmp_path, spec, name):
        path = tmp_path / name
        write_waveform_csv(path, synthesize(spec))
        return path

    def test_titrate_prints_scale(self, tmp_path, capsys):
        path = self._csv_of(tmp_path,
                            ReferencePulseSpec(kind="monophasic",
                                               amplitude_A=5000.0),
                            "mono.csv")
        rc = cli.main(["titrate", "--in", str(path)])
        assert rc == 0
        scale = float(capsys.readouterr().out.strip())
        assert 0.0 < scale < 1e4

    def test_analyze_writes_metrics(self, tmp_path):
        path = self._csv_of(tmp_path,
                            ReferencePulseSpec(kind="monophasic",
                                               amplitude_A=3000.0),
                            "mono.csv")
        out = tmp_path / "metrics.csv"
        rc = cli.main(["analyze", "--in", str(path), "--out", str(out)])
        assert rc == 0
        rows = read_metrics_csv(out)
        assert len(rows) == 1
        assert rows[0].energy_J > 0.0
        assert math.isnan(rows[0].v_limit_max_V)   # no limits known here

    def test_compare_prints_json(self, tmp_path, capsys):
        a = self._csv_of(tmp_path,
                         ReferencePulseSpec(kind="monophasic",
                                            amplitude_A=3000.0), "a.csv")
        b = self._csv_of(tmp_path,
                         ReferencePulseSpec(kind="biphasic",
                                            amplitude_A=3000.0), "b.csv")
        rc = cli.main(["compare", "--test", str(a), "--ref", str(b),
                       "--mode", "peak"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert set(out) == {"eta_percent", "correlation_r"}
        assert -100.0 < out["eta_percent"] < 1e4
        assert -1.0 <= out["correlation_r"] <= 1.0

    def test_filter_roundtrip(self, tmp_path):
        path = self._csv_of(tmp_path,
                            ReferencePulseSpec(kind="rectangular",
                                               amplitude_A=1.0), "rect.csv")
        out = tmp_path / "filt.csv"
        rc = cli.main(["filter", "--in", str(path), "--out", str(out),
                       "--cutoff-hz", "200000"])
        assert rc == 0
        raw = read_waveform_csv(path)
        flt = read_waveform_csv(out)
        assert flt.current.shape == raw.current.shape
        assert float(np.max(np.abs(flt.voltage))) \
            <= float(np.max(np.abs(raw.voltage))) + 1e-9

    def test_analyze_rejects_flat_trace(self, tmp_path, capsys):
        from pulseopt.waveform import SampledPulse
        path = tmp_path / "flat.csv"
        write_waveform_csv(path,
                           SampledPulse.from_current(np.zeros(101),
                                                     dt_us=1.0))
        rc = cli.main(["analyze", "--in", str(path),
                       "--out", str(tmp_path / "m.csv")])
        assert rc == 2
        assert "error" in json.loads(capsys.readouterr().err)
