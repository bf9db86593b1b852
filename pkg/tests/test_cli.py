import csv
import json
import math
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from perturbex.cli import CSV_HEADER, Grid, Scenario, ScenarioError, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def load(name):
    return json.loads((CONFIGS / name).read_text())


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def coefficients(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        k, v = line.split("=")
        out[k] = float(v)
    return out


def test_fix_a_scenario(tmp_path):
    assert main(["run", str(CONFIGS / "fix_a.json"), "--out", str(tmp_path), "--strict"]) == 0
    text = (tmp_path / "coefficients.txt").read_text()
    assert "lambda_1=1.0\n" in text and "lambda_2=0.5\n" in text
    c = coefficients(tmp_path / "coefficients.txt")
    assert c["lambda_3"] == pytest.approx(1 / 6, abs=1e-7)
    assert c["mu_1[1]"] == pytest.approx(0.25, abs=1e-12)
    with open(tmp_path / "remainders.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_HEADER
    lam = [r for r in rows[1:] if r[2] == "lambda"]
    assert all(float(r[5]) <= 1e-9 * abs(float(r[3])) + 1e-300 for r in lam)
    verdicts = json.loads((tmp_path / "verdicts.json").read_text())
    assert verdicts["pass"] and verdicts["schema"] == 1
    assert set(verdicts) >= {"checks", "diagnostics", "theorems", "kind", "name", "seed"}


def test_fix_c_scenario(tmp_path):
    assert main(["run", str(CONFIGS / "fix_c.json"), "--out", str(tmp_path)]) == 0
    c = coefficients(tmp_path / "coefficients.txt")
    assert c["s_0"] == pytest.approx(0.6309298, abs=1e-7)
    assert c["s_1"] == pytest.approx(3 * math.log(2) / math.log(3) ** 2, abs=1e-6)
    v = json.loads((tmp_path / "verdicts.json").read_text())
    assert v["condition_audit"]["passes"]


def test_gap_audit_scenario(tmp_path):
    assert main(["run", str(CONFIGS / "fix_b_gap.json"), "--out", str(tmp_path), "--strict"]) == 0
    v = json.loads((tmp_path / "verdicts.json").read_text())
    assert v["agreement"] == "criterion met; remainders vanish"
    assert v["conditions"]["b1_pass"] and v["dominance"]


@pytest.mark.parametrize("cfg", ["fix_a.json", "fix_b_gap.json", "fix_c.json"])
def test_determinism(tmp_path, cfg):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", str(CONFIGS / cfg), "--out", str(out), "--seed", "7"]) == 0
    for name in ("remainders.csv", "verdicts.json", "coefficients.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.mark.parametrize("grid", [{}, [], {"start": 0.1, "ratio": 0.5, "count": 2}, None])
def test_small_grid_is_schema_error(tmp_path, capsys, grid):
    cfg = load("fix_a.json")
    cfg["grid"] = grid
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path)]) == 2
    assert "grid count ≥ 4 required" in capsys.readouterr().err


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c.update(schema=2),
        lambda c: c.update(kind="other"),
        lambda c: c.update(order=7),
        lambda c: c.update(depth=11),
        lambda c: c.update(bogus=1),
        lambda c: c["potential"].update(phi={"1": 0}),
        lambda c: c["potential"].update(phi={"1": 0, "3": 1}),
        lambda c: c["shift"].update(transition=[[1, 2], [1, 1]]),
        lambda c: c.update(observables=[{"name": "x"}]),
    ],
)
def test_schema_violations(tmp_path, mutate):
    cfg = load("fix_a.json")
    mutate(cfg)
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path)]) == 2


def test_bad_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert main(["run", str(p)]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2


def test_gdms_schema_violation(tmp_path):
    cfg = load("fix_c.json")
    cfg["graph"]["edges"][0]["map"]["r"] = ["3/2"]
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path)]) == 2


def test_numerical_failure(tmp_path):
    cfg = load("fix_a.json")
    cfg["shift"]["transition"] = [[1, 0], [0, 1]]
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path)]) == 3


def test_strict_failure(tmp_path, monkeypatch):
    monkeypatch.setenv("PERTURBEX_TOL", "1e-300")
    cfg = str(CONFIGS / "fix_b_gap.json")
    assert main(["run", cfg, "--out", str(tmp_path)]) == 0
    assert main(["run", cfg, "--out", str(tmp_path), "--strict"]) == 1


def test_json_flag(tmp_path, capsys):
    assert main(["run", str(CONFIGS / "fix_a.json"), "--out", str(tmp_path), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["pass"] is True


def test_round_trip():
    sc = Scenario.from_dict(load("fix_c.json"))
    assert Scenario.loads(sc.dumps()) == sc
    sc2 = Scenario(
        kind="shift-perturbation",
        name="x",
        order=2,
        depth=2,
        grid=Grid(0.1, 0.5, 4),
        shift={"states": ["a", "b"], "transition": [[1, 1], [1, 0]]},
        potential={"depth": 1, "phi": {"a": 0.5, "b": -0.2}, "coefficients": [{"a": 1, "b": 0}]},
        observables=[{"cylinder": "a"}],
    )
    assert Scenario.loads(sc2.dumps()) == sc2


def test_round_trip_rejects_invalid():
    with pytest.raises(ScenarioError):
        Scenario.loads(json.dumps({"schema": 1, "kind": "gdms", "grid": {"start": 0.1, "ratio": 0.5, "count": 4}}))


def test_multichar_labels(tmp_path):
    cfg = {
        "schema": 1,
        "kind": "shift-perturbation",
        "order": 1,
        "depth": 2,
        "shift": {"states": ["up", "down"], "transition": [[1, 1], [1, 1]]},
        "potential": {"depth": 2, "phi": {"up,up": 0.1, "up,down": 0, "down,up": 0, "down,down": -0.1},
                      "coefficients": [{"up,up": 1}]},
        "grid": {"start": 0.01, "ratio": 0.5, "count": 4},
        "observables": [{"name": "[up]", "cylinder": "up"}],
    }
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path), "--strict"]) == 0
    rows = (tmp_path / "remainders.csv").read_text()
    assert "g[up,down]" in rows


@pytest.mark.skipif(shutil.which("perturbex") is None, reason="console script not installed")
def test_console_script(tmp_path):
    r = subprocess.run(["perturbex", "run", str(CONFIGS / "fix_a.json"), "--out", str(tmp_path)], capture_output=True)
    assert r.returncode == 0


def test_module_entry(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "perturbex.cli", "run", str(CONFIGS / "fix_c.json"), "--out", str(tmp_path)],
        capture_output=True,
    )
    assert r.returncode == 0


def test_selfcheck_json(capsys):
    assert main(["selfcheck", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out) == 8 and all(r["passed"] for r in out)


def test_selfcheck_tight_tolerance_fails_cleanly(monkeypatch, capsys):
    monkeypatch.setenv("PERTURBEX_TOL", "3=1e-30")
    assert main(["selfcheck"]) == 1
    lines = capsys.readouterr().out.splitlines()
    assert sum("[FAIL]" in line for line in lines) == 1
