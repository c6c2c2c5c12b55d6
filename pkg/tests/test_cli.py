import csv
import io
import json

import pytest

from dqlab import cli


def test_invalid_config_exit_2(capsys):
    assert cli.main(["verify", "--grid", "7"]) == 2
    assert cli.main(["verify", "--check", "nope"]) == 2
    assert cli.main(["verify", "--nu-order", "4", "--cap", "8"]) == 2
    assert cli.main(["verify", "--dim", "4", "--check", "kahler_order1"]) == 2
    assert cli.main(["frobnicate"]) == 2


def test_config_file_and_override(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"grid_n": 16, "eps": 0.1, "checks": ["scalar_formulas"]}))
    cfg = cli.RunConfig.from_sources(str(p), {"eps": 0.2})
    assert cfg.grid_n == 16 and cfg.eps == 0.2 and cfg.checks == ["scalar_formulas"]
    p.write_text(json.dumps({"bogus": 1}))
    assert cli.main(["verify", "--config", str(p)]) == 2


def test_verify_report(tmp_path):
    out = tmp_path / "r.json"
    code = cli.main(["verify", "--check", "moyal_oracle", "--grid", "16", "--report", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert [r["name"] for r in rep["results"]] == ["moyal_oracle"]
    assert rep["config"]["grid_n"] == 16


def test_verify_failure_exit_1(tmp_path):
    assert cli.main(["verify", "--check", "lemma_formula", "--grid", "16", "--report", str(tmp_path / "r.json")]) == 1


def test_identical_reports(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        cli.main(["verify", "--check", "scalar_formulas", "--check", "first_variation", "--grid", "16", "--report", str(p)])
    strip = lambda p: [{k: v for k, v in r.items() if k != "runtime_ms"} for r in json.loads(p.read_text())["results"]]
    assert strip(a) == strip(b)


def test_compute_csv(capsys):
    assert cli.main(["compute", "--field", "hermitian_scalar", "--dim", "2", "--eps", "0.3", "--grid", "8"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 9 and all(len(r) == 8 for r in rows)
    assert float(rows[0][0]) == 0.0


def test_compute_component_validation(capsys):
    assert cli.main(["compute", "--field", "hermitian_ricci", "--component", "0,5", "--grid", "8"]) == 2


def test_bench(capsys):
    assert cli.main(["bench", "--grid", "8"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert "fedosov.build" in data["timings_ms"]


def test_list(capsys):
    assert cli.main(["verify", "--list"]) == 0
    assert "moyal_oracle" in capsys.readouterr().out
