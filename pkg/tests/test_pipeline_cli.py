import json

import pytest

from orbithick.cli import main
from orbithick.pipeline import ConfigError, Pipeline, RunConfig, builtin_config, canonical_json


def _load(name, **over):
    cfg = RunConfig.load(builtin_config(name))
    for k, v in over.items():
        setattr(cfg, k, v)
    return cfg


def test_config_validation(tmp_path):
    d = json.loads(builtin_config("trivial").read_text())
    d["lattice"] = str(builtin_config("trivial").parent.parent / "fixtures" / "trivial.json")
    with pytest.raises(ConfigError):
        RunConfig.from_dict({**d, "bogus": 1})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({**d, "word_length": 0})
    cfg = RunConfig.from_dict(d)
    assert RunConfig.from_dict(cfg.to_json()).hash() == cfg.hash()


def test_hash_tracks_config():
    a = _load("trivial")
    b = _load("trivial", seed=a.seed + 1)
    assert a.hash() != b.hash()
    assert a.hash() == _load("trivial").hash()


@pytest.mark.parametrize("name, cusps, orders, rank, torsion", [
    ("psl2z", 1, [2, 3], 0, [6]),
    ("gamma2", 3, [], 2, []),
    ("figure_eight", 1, [], 1, []),
])
def test_analyze_examples(name, cusps, orders, rank, torsion):
    art = Pipeline(_load(name)).analyze()
    assert art["cusp_count"] == cusps
    assert sorted(art["elliptic_orders"]) == orders
    assert art["torsion_free"] == (not orders)
    assert art["abelianization"]["rank"] == rank
    assert art["abelianization"]["torsion"] == torsion


def test_cli_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["analyze", "--config", str(bad)]) == 2
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"lattice": "no_such_file.json", "word_length": 3}))
    assert main(["analyze", "--config", str(missing)]) == 2
    assert main(["analyze", "--builtin", "trivial", "--eps-n", "-1"]) == 2


def test_cli_resource_limit_is_indeterminate(tmp_path):
    assert main(["cover", "--builtin", "figure_eight", "--out", str(tmp_path)]) == 3
    # the stages that finished are still written
    assert (tmp_path / "analyze.json").exists()


def test_cli_trivial_certify_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["certify", "--builtin", "trivial", "--out", str(a)]) == 0
    out = capsys.readouterr().out
    assert "certificate PASS" in out
    assert main(["certify", "--builtin", "trivial", "--out", str(b), "--format", "json"]) == 0
    art = json.loads(capsys.readouterr().out)
    assert art["passed"] and art["stage"] == "certify"
    for stage in ("analyze", "cover", "nerve", "homology", "certify"):
        assert (a / f"{stage}.json").read_bytes() == (b / f"{stage}.json").read_bytes()
        doc = json.loads((a / f"{stage}.json").read_text())
        assert doc["config_hash"] == art["config_hash"] and doc["version"] == art["version"]
    hom = json.loads((a / "homology.json").read_text())
    assert hom["full"]["betti_Q"][:2] == [1, 0]


def test_cli_seed_changes_cover(tmp_path):
    assert main(["cover", "--builtin", "trivial", "--out", str(tmp_path / "s1")]) == 0
    assert main(["cover", "--builtin", "trivial", "--seed", "7", "--out", str(tmp_path / "s7")]) == 0
    c1 = json.loads((tmp_path / "s1" / "cover.json").read_text())
    c7 = json.loads((tmp_path / "s7" / "cover.json").read_text())
    assert c1["config_hash"] != c7["config_hash"]


def test_canonical_json_is_stable():
    assert canonical_json({"b": 1, "a": [1.5, 2]}) == canonical_json({"a": [1.5, 2], "b": 1})
    assert canonical_json({}).endswith("\n")
