import json
import subprocess
import sys

import numpy as np
import pytest

from scenery_lab import cli
from scenery_lab.errors import ConfigError, InvalidParams
from scenery_lab.parallel import pmap, thread_count
from scenery_lab.report import RunConfig, value
from scenery_lab.spec_io import SPEC_TYPES, canonical_json, measure_from_spec, parse_spec_arg

SPECS = {
    "ifs": {"type": "ifs", "dim": 1, "maps": [{"ratio": 0.5, "offset": [0.0]}, {"ratio": 0.25, "offset": [0.75]}],
            "weights": [0.6, 0.4], "depth": 20},
    "ifs_cantor": {"type": "ifs", "cantor_alpha": 0.25, "depth": 20},
    "grid": {"type": "grid", "dim": 2, "rule": {"kind": "cantor", "axes": [0, 1], "alpha": 0.25}, "depth": 12},
    "product": {"type": "product", "factors": [{"type": "ifs", "cantor_alpha": 0.1, "depth": 12},
                                               {"type": "grid", "dim": 1, "rule": {"kind": "uniform"},
                                                "depth": 12}]},
    "splice": {"type": "splice", "dim": 2, "rule_a": {"kind": "plane", "axes": [0]},
               "rule_b": {"kind": "uniform"}, "q": 0.5, "block_growth": {"constant": 2}, "depth": 16},
    "lebesgue_ball": {"type": "lebesgue_ball", "dim": 3},
    "plane": {"type": "plane", "dim": 2, "axes": [1]},
    "point_mass": {"type": "point_mass", "dim": 2, "at": [0.25, -0.5]},
    "mixture": {"type": "mixture", "weights": [0.3, 0.7],
                "components": [{"type": "point_mass", "dim": 1}, {"type": "lebesgue_ball", "dim": 1}]},
}


def test_every_type_has_a_fixture():
    assert {s["type"] for s in SPECS.values()} == set(SPEC_TYPES)


@pytest.mark.parametrize("name", sorted(SPECS))
def test_spec_round_trip(name):
    mu = measure_from_spec(SPECS[name])
    spec = mu.to_spec()
    nu = measure_from_spec(json.loads(canonical_json(spec)))
    assert nu.to_spec() == spec
    for a, b in zip(mu.iter_levels(6), nu.iter_levels(6)):
        assert np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi)
        assert np.array_equal(a.mlo, b.mlo) and np.array_equal(a.mhi, b.mhi)


@pytest.mark.parametrize("bad", [
    {"type": "nope"},
    {"type": "ifs", "dim": 1, "maps": [{"ratio": 0.5}], "weights": [1.0]},
    {"type": "grid", "dim": "2", "rule": {"kind": "uniform"}},
    {"type": "splice", "dim": 2, "rule_a": {"kind": "uniform"}, "rule_b": {"kind": "uniform"}, "q": 0.5},
    {"type": "splice", "dim": 2, "rule_a": {"kind": "uniform"}, "rule_b": {"kind": "uniform"}, "q": 0.5,
     "depth": 10, "block_growth": "quadratic"},
    {"type": "product", "factors": [{"type": "lebesgue_ball", "dim": 1}]},
    {"type": "point_mass", "dim": 2, "at": [0.0]},
    [1, 2],
])
def test_malformed_specs(bad):
    with pytest.raises(ConfigError):
        measure_from_spec(bad)


def test_out_of_range_specs():
    with pytest.raises(InvalidParams):
        measure_from_spec({"type": "lebesgue_ball", "dim": 4})
    with pytest.raises(InvalidParams):
        measure_from_spec({"type": "ifs", "dim": 1, "maps": [{"ratio": 0.5, "offset": [0.0]}],
                           "weights": [0.5]})


def test_parse_spec_arg(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(SPECS["plane"]))
    assert parse_spec_arg(str(path)) == SPECS["plane"]
    assert parse_spec_arg(json.dumps(SPECS["plane"])) == SPECS["plane"]
    with pytest.raises(ConfigError):
        parse_spec_arg(str(tmp_path / "missing.json"))


def _run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_build_measure_writes_canonical_files(tmp_path, capsys):
    code, out, _ = _run(["build-measure", "--spec", json.dumps(SPECS["grid"]), "--out", str(tmp_path)], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert out == (tmp_path / "summary.json").read_text()
    assert json.loads((tmp_path / "measure.json").read_text()) == measure_from_spec(SPECS["grid"]).to_spec()
    for entry in doc["summary"].values():
        assert set(entry) == {"value", "tag", "error"}
    prov = doc["provenance"]
    assert set(prov) >= {"config", "config_hash", "seed", "depth", "tool_version"}
    assert RunConfig.from_identity(prov["config"]).config_hash() == prov["config_hash"]


def test_cone_constant_matches_one_sixth(tmp_path, capsys):
    code, out, _ = _run(["cone-constant", "--dim", "2", "--k", "1", "--alpha", "0.5", "--samples", "200000",
                         "--seed", "3", "--out", str(tmp_path)], capsys)
    assert code == 0
    s = json.loads(out)["summary"]
    eps, se = s["epsilon"]["value"], s["std_error"]["value"]
    assert abs(eps - 1 / 6) <= 3 * se
    assert s["epsilon"]["tag"] == "empirical" and s["alpha"]["tag"] == "parameter"


def test_determinism_and_replay(tmp_path, capsys):
    spec = json.dumps(SPECS["ifs_cantor"])
    argv = ["scan-porosity", "--spec", spec, "--points", "2", "--seed", "5", "--T", "3", "--dt", "0.25"]
    runs = []
    for name in ("a", "b"):
        assert _run(argv + ["--out", str(tmp_path / name)], capsys)[0] == 0
        runs.append({p.name: p.read_bytes() for p in (tmp_path / name).iterdir()})
    assert runs[0] == runs[1]
    assert "porosity.csv" in runs[0]
    code, _, _ = _run(["replay", str(tmp_path / "a" / "summary.json"), "--out", str(tmp_path / "c")], capsys)
    assert code == 0
    assert {p.name: p.read_bytes() for p in (tmp_path / "c").iterdir()} == runs[0]


@pytest.mark.parametrize("argv, code", [
    (["build-measure", "--spec", '{"type": "ifs", "dim": 1, "maps": [], "weights": [2.0]}'], 2),
    (["build-measure", "--spec", "{not json"], 2),
    (["scan-porosity", "--spec", '{"type": "plane", "dim": 2, "axes": [0]}', "--points", "3"], 2),
    (["dim-local", "--spec", '{"type": "ifs", "cantor_alpha": 0.25, "depth": 20}', "--x", "0.5",
      "--r-max", "0.05"], 4),
    (["dim-local", "--spec", '{"type": "ifs", "cantor_alpha": 0.25, "depth": 20}', "--x", "0",
      "--r-min", "1e-15"], 5),
])
def test_error_exit_codes_write_nothing(tmp_path, capsys, argv, code):
    out_dir = tmp_path / "out"
    got, out, err = _run(argv + ["--out", str(out_dir)], capsys)
    assert got == code
    assert out == ""
    assert json.loads(err)["exit_code"] == code
    assert not out_dir.exists() or not any(out_dir.iterdir())


def test_salli_and_density_commands(tmp_path, capsys):
    code, out, _ = _run(["salli", "--alpha", "0.25", "--out", str(tmp_path / "s")], capsys)
    assert code == 0
    s = json.loads(out)["summary"]
    assert s["dimension"]["value"] == pytest.approx(np.log(2) / np.log(3))
    code, out, _ = _run(["density-scan", "--spec", json.dumps(SPECS["plane"]), "--x", "0,0.1", "--k", "1",
                         "--out", str(tmp_path / "d")], capsys)
    assert code == 0
    assert json.loads(out)["summary"]["regular"]["value"] is True
    assert (tmp_path / "d" / "density.csv").exists()


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "scenery_lab.cli", "salli", "--alpha", "0.1", "--out",
                           str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "salli"


def test_tagged_values():
    assert value(1.0, "closed_form") == {"value": 1.0, "tag": "closed_form", "error": None}
    with pytest.raises(ValueError):
        value(1.0, "empirical")
    with pytest.raises(ValueError):
        value(1.0, "guess", 0.1)


def test_thread_env(monkeypatch):
    monkeypatch.setenv("SCENERY_LAB_THREADS", "3")
    assert thread_count() == 3
    assert pmap(lambda v: v * v, range(20)) == [v * v for v in range(20)]
    monkeypatch.setenv("SCENERY_LAB_THREADS", "1")
    assert pmap(lambda v: -v, [1, 2]) == [-1, -2]
