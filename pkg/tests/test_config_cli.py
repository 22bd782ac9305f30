import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from dicke_usc import cli, emission
from dicke_usc import config as cfgmod

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, raw, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


def test_defaults_fill_in():
    cfg = cfgmod.resolve({"mode": "energy-sweep"})
    assert cfg["model"]["n_emitters"] == 2
    assert cfg["solver"]["window"] == 6.0
    assert cfg["parallelism"]["workers"] == 0
    assert cfgmod.lambda_grid(cfg).size == 151


@pytest.mark.parametrize("raw,path", [
    ({"mode": "fly"}, "mode"),
    ({"mode": "energy-sweep", "model": {"n_emitters": 0}}, "model/n_emitters"),
    ({"mode": "energy-sweep", "model": {"colour": 1}}, "model"),
    ({"mode": "energy-sweep", "model": {"n_emitters": 3, "omega_a": [1.0, 1.1]}}, "model/omega_a"),
    ({"mode": "energy-sweep", "grids": {"lambda": {"start": 0, "stop": 1, "count": 3,
                                                   "scale": "log"}}}, "grids/lambda/start"),
    ({"mode": "spectrum-map", "model": {"spin_rep": "dicke"}}, "baths/emitters"),
    ({"mode": "spectrum-map", "model": {"n_emitters": 2},
      "baths": [{"kind": "individual", "gamma": 1e-3, "site": 4}]}, "baths/0/site"),
])
def test_schema_errors_name_the_key(raw, path):
    with pytest.raises(cfgmod.ConfigError) as err:
        cfgmod.resolve(raw)
    assert err.value.path == path


def test_log_grid():
    cfg = cfgmod.resolve({"mode": "energy-sweep", "grids": {
        "lambda": {"start": 0.01, "stop": 10, "count": 4, "scale": "log"}}})
    assert np.allclose(cfgmod.lambda_grid(cfg), [0.01, 0.1, 1.0, 10.0])


def test_explicit_channels_expand_sites():
    cfg = cfgmod.resolve({"mode": "spectrum-map", "model": {"n_emitters": 3},
                          "baths": [{"kind": "cavity", "gamma": 1e-3},
                                    {"kind": "individual", "gamma": 2e-3, "temperature": 0.1}]})
    chans = cfgmod.channels(cfg, cfgmod.model_params(cfg))
    assert [c.site for c in chans] == [None, 0, 1, 2]
    assert chans[0].temperature == 0.0


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = cfgmod.load(path)
    assert cfg["mode"] in cfgmod.MODES


SWEEP = {"mode": "energy-sweep", "model": {"n_emitters": 1},
         "grids": {"lambda": {"start": 0.0, "stop": 0.5, "count": 6}}, "solver": {"levels": 4}}


def test_energy_sweep_is_deterministic(tmp_path):
    path = _write(tmp_path, SWEEP)
    assert cli.main(["energy-sweep", "--config", str(path), "--out", str(tmp_path / "a"),
                     "--workers", "1"]) == 0
    assert cli.main(["energy-sweep", "--config", str(path), "--out", str(tmp_path / "b"),
                     "--workers", "2"]) == 0
    a = (tmp_path / "a" / "levels.csv").read_bytes()
    assert a == (tmp_path / "b" / "levels.csv").read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a" / "levels.csv")))
    assert len(rows) > 0
    json.loads((tmp_path / "a" / "crossings.json").read_text())


def test_manifest_round_trip(tmp_path):
    path = _write(tmp_path, SWEEP)
    cli.main(["energy-sweep", "--config", str(path), "--out", str(tmp_path), "--workers", "1"])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["workers"] == 1
    assert manifest["engine_version"]
    again = cfgmod.resolve({k: v for k, v in manifest["config"].items()})
    assert again == manifest["config"]


def test_dsc_compare(tmp_path):
    raw = {"mode": "dsc-compare", "model": {"n_emitters": 1}, "grids": {"lambda": [3.0, 5.0]},
           "dsc": {"n_max": 3, "order": 2, "levels": 4}}
    assert cli.main(["dsc-compare", "--config", str(_write(tmp_path, raw)), "--out",
                     str(tmp_path), "--workers", "1"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "dsc_compare.csv")))
    assert len(rows) == 8
    assert max(float(r["abs_error"]) for r in rows) < 1e-2


MAP = {"mode": "spectrum-map", "model": {"n_emitters": 1},
       "grids": {"lambda": [0.1, 0.3], "omega": {"start": 0.5, "stop": 1.5, "count": 11}},
       "solver": {"window": 3.0}}


def test_spectrum_map_outputs(tmp_path):
    assert cli.main(["spectrum-map", "--config", str(_write(tmp_path, MAP)), "--out",
                     str(tmp_path), "--workers", "1"]) == 0
    meta = json.loads((tmp_path / "map.json").read_text())
    grid = np.fromfile(tmp_path / "map.bin", dtype=meta["dtype"]).reshape(meta["dims"])
    rows = list(csv.DictReader(open(tmp_path / "spectrum.csv")))
    assert grid.shape == (2, 11) and len(rows) == 22
    assert float(rows[13]["intensity"]) == grid[1, 2]


def test_partial_failure_exit_code(tmp_path, monkeypatch):
    real = emission.spectrum_at

    def flaky(params, omega, setup):
        if params.lam > 0.2:
            raise RuntimeError("no convergence")
        return real(params, omega, setup)

    monkeypatch.setattr(emission, "spectrum_at", flaky)
    code = cli.main(["spectrum-map", "--config", str(_write(tmp_path, MAP)), "--out",
                     str(tmp_path), "--workers", "1"])
    assert code == 2
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "partial"
    assert [t["status"] for t in manifest["tasks"]] == ["ok", "failed"]


def test_config_error_exit_code(tmp_path, capsys):
    path = _write(tmp_path, {"mode": "energy-sweep", "solver": {"levels": -1}})
    assert cli.main(["energy-sweep", "--config", str(path), "--out", str(tmp_path)]) == 1
    assert "solver/levels" in capsys.readouterr().err
    assert cli.main(["spectrum-map", "--config", str(_write(tmp_path, SWEEP, "b.yaml"))]) == 1
    assert cli.main(["energy-sweep"]) == 1


def test_validation_negative_control(tmp_path):
    raw = {"mode": "validate", "validate": {"criteria": [3], "tol_scale": 0.01}}
    code = cli.main(["validate", "--config", str(_write(tmp_path, raw)), "--out", str(tmp_path)])
    assert code == 1
    report = json.loads((tmp_path / "validation.json").read_text())
    assert report["passed"] is False
    assert report["criteria"][0]["passed"] is False


def test_worker_resolution(monkeypatch):
    cfg = cfgmod.resolve({"mode": "energy-sweep", "parallelism": {"workers": 3}})
    monkeypatch.delenv("ENGINE_WORKERS", raising=False)
    assert cli.resolve_workers(None, cfg) == 3
    monkeypatch.setenv("ENGINE_WORKERS", "5")
    assert cli.resolve_workers(None, cfg) == 5
    assert cli.resolve_workers(2, cfg) == 2
    assert cli.resolve_workers(0, cfg) >= 1
