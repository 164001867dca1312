import json

import numpy as np
import pytest

from bloch_instability import cli
from bloch_instability.bloch import SpatialGrid
from bloch_instability.config import (bundled_scenarios, load_config, load_initial_perturbation,
                                      output_root, read_samples)
from bloch_instability.errors import ConfigurationError, ShapeError
from bloch_instability.spectra import XiGrid, bloch_spectrum


def test_bundled_scenarios_load():
    names = bundled_scenarios()
    assert {"heat", "heat_plus_c", "mathieu_rd", "kdvks", "kdvks_damping"} <= set(names)
    for name in names:
        cfg = load_config(name)
        assert cfg.name == name
        cfg.build_operator()


@pytest.mark.parametrize("override,key", [
    ("grid.colour=3", "grid.colour"),
    ("experiment.etaa=0.1", "experiment.etaa"),
    ("bogus=1", "bogus"),
])
def test_unknown_keys_are_named(override, key):
    with pytest.raises(ConfigurationError, match=key.replace(".", r"\.")):
        load_config("heat", [override])


@pytest.mark.parametrize("override,key", [
    ("grid.points_per_period=48", "grid"),
    ("grid.truncation=40", "grid.truncation"),
    ("experiment.deltas=[0.5]", "experiment.deltas"),
    ("nonlinearity.kind=\"cubic\"", "nonlinearity"),
    ("mode.kind=\"wave\"", "mode.kind"),
    ("projection.n_contour=16", "projection.n_contour"),
])
def test_invalid_values_are_named(override, key):
    with pytest.raises(ConfigurationError, match=key.replace(".", r"\.")):
        load_config("heat", [override])


def test_missing_source():
    with pytest.raises(ConfigurationError, match="bundled"):
        load_config("no_such_scenario")
    with pytest.raises(ConfigurationError):
        load_config("/nonexistent/file.json")


def test_overrides_parse_json_and_nest():
    cfg = load_config("kdvks", ["mode.beta=0.25", "experiment.deltas=[0.01, 0.02]"])
    assert cfg.mode.beta == 0.25 and cfg.experiment.deltas == [0.01, 0.02]
    with pytest.raises(ConfigurationError):
        load_config("kdvks", ["mode.beta"])


def test_output_root_precedence(monkeypatch, tmp_path):
    cfg = load_config("heat")
    monkeypatch.delenv("BLOCH_INSTAB_OUT", raising=False)
    assert str(output_root(cfg)) == "bloch_out"
    monkeypatch.setenv("BLOCH_INSTAB_OUT", str(tmp_path))
    assert output_root(cfg) == tmp_path
    assert str(output_root(cfg, "elsewhere")) == "elsewhere"


def test_initial_recipes(tmp_path):
    cfg = load_config("heat", ['initial={"kind": "mode", "k": 1, "m": 2, "amplitude": 0.5}'])
    grid = cfg.spatial_grid()
    u = load_initial_perturbation(cfg, grid)
    assert np.allclose(np.abs(u.values), 0.5)
    cfg = load_config("heat")
    a = load_initial_perturbation(cfg, grid, seed=3)
    b = load_initial_perturbation(cfg, grid, seed=3)
    assert np.array_equal(a.values, b.values) and a.is_real()
    assert a.l2 == pytest.approx(1.0)
    np.save(tmp_path / "u.npy", a.values[0])
    np.savetxt(tmp_path / "u.csv", np.c_[a.values[0].real, a.values[0].imag], delimiter=",")
    for name in ("u.npy", "u.csv"):
        cfg = load_config("heat", [f'initial={{"kind": "samples", "path": "{tmp_path / name}"}}'])
        assert np.allclose(load_initial_perturbation(cfg, grid).values, a.values)
    with pytest.raises(ShapeError):
        read_samples(tmp_path / "u.npy", SpatialGrid(4, 32))
    with pytest.raises(ConfigurationError):
        read_samples(tmp_path / "missing.npy", grid)


def test_prepared_recipe_needs_spectrum():
    cfg = load_config("heat_plus_c")
    grid = cfg.spatial_grid()
    with pytest.raises(ConfigurationError):
        load_initial_perturbation(cfg, grid)
    s = bloch_spectrum(cfg.build_operator(), XiGrid.for_grid(grid), cfg.truncation)
    u = load_initial_perturbation(cfg, grid, s, cfg.build_operator())
    assert u.l2 == pytest.approx(1.0)


def _run(tmp_path, *argv):
    return cli.run(list(argv) + ["--out", str(tmp_path)])


def test_spectrum_command_outputs(tmp_path, capsys):
    assert _run(tmp_path, "spectrum", "--config", "heat") == 0
    out = tmp_path / "heat" / "spectrum"
    assert {"spectrum.csv", "summary.csv", "summary.json", "spectrum.svg"} <= {p.name for p in out.iterdir()}
    header = (out / "spectrum.csv").read_text().splitlines()[0]
    assert header == "xi,branch_id,re_lambda,im_lambda,crossing_flag"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["exit_code"] == 0 and summary["config"]["name"] == "heat"
    assert "summary at" in capsys.readouterr().out


def test_runs_are_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert _run(tmp_path / sub, "spectrum", "--config", "mathieu_rd") == 0
        assert _run(tmp_path / sub, "lambdam", "--config", "heat", "--seed", "5") == 2
    for rel in ("mathieu_rd/spectrum/spectrum.csv", "mathieu_rd/spectrum/spectrum.svg",
                "heat/lambdam/masses.csv", "heat/lambdam/summary.json"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


@pytest.mark.parametrize("cmd,scenario,code", [
    ("lambdam", "heat", 2),
    ("lambdam", "heat_plus_c", 0),
    ("hypothesis", "mathieu_rd", 0),
    ("linear", "kdvks", 0),
    ("instability", "heat", 2),
    ("dissipative", "kdvks_damping", 2),
])
def test_exit_codes(tmp_path, cmd, scenario, code):
    assert _run(tmp_path, cmd, "--config", scenario) == code
    summary = json.loads((tmp_path / scenario / cmd / "summary.json").read_text())
    assert summary["exit_code"] == code and summary["command"] == cmd


def test_errors_exit_one(tmp_path, capsys):
    assert _run(tmp_path, "spectrum", "--config", "heat", "--override", "grid.bad=1") == 1
    assert "grid.bad" in capsys.readouterr().err


def test_u0_flag(tmp_path):
    cfg = load_config("heat_plus_c")
    grid = cfg.spatial_grid()
    x = grid.x
    np.savetxt(tmp_path / "u0.txt", np.cos(0.5 * x))
    assert _run(tmp_path, "lambdam", "--config", "heat_plus_c", "--u0", str(tmp_path / "u0.txt")) == 0
    summary = json.loads((tmp_path / "heat_plus_c" / "lambdam" / "summary.json").read_text())
    assert summary["report"]["lambda_m"] == pytest.approx(0.75, abs=1e-9)


def test_selftest_command(tmp_path):
    assert _run(tmp_path, "selftest") == 0
    summary = json.loads((tmp_path / "selftest" / "summary.json").read_text())
    assert summary["exit_code"] == 0
