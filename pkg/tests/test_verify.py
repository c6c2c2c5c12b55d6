import json
import math
from dataclasses import replace
from pathlib import Path

import pytest

from dqlab import verify as V

CHEAP = ["connection_invariants", "scalar_formulas", "moyal_oracle", "lemma_formula_half", "equivariance_ricci"]


@pytest.fixture(scope="module")
def cfg():
    return V.CheckConfig(grid_n=16)


def test_config_validation():
    with pytest.raises(ValueError):
        V.CheckConfig(dim=3)
    with pytest.raises(ValueError):
        V.CheckConfig(grid_n=15)
    with pytest.raises(ValueError):
        V.CheckConfig(eps=-0.1)
    with pytest.raises(Exception):
        V.CheckConfig(nu_order=4, weyl_degree_cap=8)


def test_registry_entries():
    assert len(V.REGISTRY) >= 30
    for name, chk in V.REGISTRY.items():
        assert chk.name == name and chk.anchor and chk.tolerance >= 0
        assert set(chk.dims) <= {2, 4}


def test_result_invariant(cfg):
    for name in CHEAP:
        r = V.run_check(name, cfg)
        assert r.passed == (r.residual <= r.tolerance)
        assert r.paper_anchor == V.REGISTRY[name].anchor
        assert r.config_echo["grid_n"] == 16 and r.runtime_ms >= 0


def test_unknown_and_unsupported(cfg):
    with pytest.raises(KeyError):
        V.run_check("nope", cfg)
    with pytest.raises(ValueError):
        V.run_check("kahler_order1", replace(cfg, dim=4, grid_n=8))
    with pytest.raises(KeyError):
        V.run_suite(cfg, ["nope"])


def test_empty_suite(cfg):
    assert V.run_suite(cfg, []) == []


def test_deterministic_and_parallel(cfg):
    a = V.run_suite(cfg, CHEAP)
    b = V.run_suite(cfg, CHEAP, parallelism=3)
    assert [r.residual for r in a] == [r.residual for r in b]
    assert [r.name for r in b] == CHEAP


def test_threads_env(monkeypatch):
    monkeypatch.setenv("DQLAB_THREADS", "3")
    assert V.threads() == 3
    monkeypatch.setenv("DQLAB_THREADS", "x")
    assert V.threads() == 1


def test_report_roundtrip(cfg, tmp_path):
    res = V.run_suite(cfg, CHEAP[:2])
    rep = V.report(cfg, res)
    path = tmp_path / "r.json"
    V.write_report(str(path), rep)
    back = json.loads(path.read_text())
    assert back["version"] == V.REPORT_VERSION
    assert set(back["results"][0]) >= {"name", "paper_anchor", "residual", "tolerance", "passed", "runtime_ms",
                                       "config_echo"}


def test_failure_is_reported_not_raised(cfg, monkeypatch):
    def boom(c):
        raise RuntimeError("x")

    monkeypatch.setitem(V.REGISTRY, "boom", V.Check("boom", "a", 1.0, (2,), boom))
    (r,) = V.run_suite(cfg, ["boom"])
    assert not r.passed and math.isinf(r.residual) and "RuntimeError" in r.details["error"]


def test_anchors_documented():
    readme = (Path(__file__).resolve().parents[1] / "README.md").read_text()
    for chk in V.REGISTRY.values():
        assert chk.anchor in readme, chk.name


def test_flat_df_order0():
    r = V.run_check("df_order0", V.CheckConfig(dim=4, grid_n=8, eps=0.0, n_pairs=1))
    assert abs(r.details["sides"][0][0] + 0.5 * r.details["sides"][0][1]) < 1e-9
