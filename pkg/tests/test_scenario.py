import pytest

from decwf.errors import ConfigError
from decwf.scenario import bundled_scenarios, load_scenario, parse_seeds, resolve
from decwf.workflow import run_case


def test_parse_seeds():
    assert parse_seeds(7) == [7]
    assert parse_seeds("0-3") == [0, 1, 2, 3]
    assert parse_seeds("1,4,9-10") == [1, 4, 9, 10]
    assert parse_seeds([3, 2]) == [3, 2]
    for bad in ("5-2", "x", "", True):
        with pytest.raises(ConfigError):
            parse_seeds(bad)


def test_bundled_scenarios_load():
    names = set(bundled_scenarios())
    assert {"wcp1", "wcp15", "wcp15-omission", "wcp17", "aba-adversarial", "notice-board", "group-key",
            "anon", "mutex", "empty"} <= names
    for name in names:
        sc = load_scenario(resolve(name))
        assert sc.variants and sc.seeds


def test_empty_scenario_run():
    out = load_scenario({"protocol": "none"}).run(0)
    assert [r.kind for r in out.trace] == ["setup", "end"]
    assert out.passed


@pytest.mark.parametrize("name", ["wcp1", "wcp15", "wcp15-omission", "wcp17", "aba-adversarial", "notice-board",
                                  "group-key", "anon", "mutex"])
def test_bundled_scenario_few_seeds(name):
    sc = load_scenario(resolve(name))
    for v in sc.variants:
        for seed in range(2):
            out = sc.run(seed, v)
            assert out.passed, (v.name, seed, out.rows())


def test_rotate_variant_picks_by_seed():
    sc = load_scenario(resolve("aba-adversarial"))
    v = sc.variants[0]
    assert [list(v.adversary(sc, s).corrupted) for s in range(5)] == [["p1"], ["p2"], ["p3"], ["p4"], ["p1"]]


BAD = [
    ({"protocol": "teleport"}, "unknown protocol"),
    ({"profile": "huge"}, "unknown profile"),
    ({"nodes": ["a", "a"]}, "distinct"),
    ({"dmax": 0}, "positive"),
    ({"suite": "nope"}, "unknown suite"),
    ({"protocol": "aba", "nodes": ["a", "b", "c"], "t": 1}, "n > 3t"),
    ({"protocol": "aba", "nodes": ["a", "b", "c", "d"], "t": 1, "aba": {"inputs": [0, 1]}}, "one input bit"),
    ({"protocol": "aba", "nodes": ["a", "b", "c", "d"], "t": 1, "adversary": {"corrupted": {"a": "silent", "b": "silent"}}}, "budget"),
    ({"protocol": "aba", "nodes": ["a", "b", "c", "d"], "t": 1, "adversary": {"corrupted": {"a": "teleport"}}}, "unknown adversary"),
    ({"protocol": "aba", "nodes": ["a", "b", "c", "d"], "t": 1, "matrix": {"scripts": ["silent"], "corrupt": ["a", "b"]}}, "budget"),
    ({"protocol": "aba", "nodes": ["a", "b", "c", "d"], "t": 1, "adversary": {"corrupted": {"a": "silent"}, "drops": [["b", "c"]]}}, "honest link"),
    ({"protocol": "mutex", "nodes": ["a"], "mutex": {"groups": 3}}, "groups"),
    ({"protocol": "anon", "anon": {"size": 1}}, "size"),
    ({"protocol": "workflow", "workflow": {}}, "definition"),
    ({"seeds": "9-1"}, "empty seed range"),
]


@pytest.mark.parametrize("doc,match", BAD)
def test_config_errors(doc, match):
    with pytest.raises(ConfigError, match=match):
        load_scenario(doc)


def test_workflow_scenario_errors(tmp_path, wcp15):
    import yaml

    (tmp_path / "p.yaml").write_text(yaml.safe_dump(wcp15.to_doc()))
    base = {"protocol": "workflow", "workflow": {"definition": "p.yaml", "orchestrator": "o"}}
    assert "o" in load_scenario(base, base_dir=tmp_path).nodes
    with pytest.raises(ConfigError, match="dynamic"):
        load_scenario({**base, "workflow": {**base["workflow"], "dynamic": {"A": [1, 1]}}}, base_dir=tmp_path)
    with pytest.raises(ConfigError, match="symbolic"):
        load_scenario({**base, "adversary": {"corrupted": {"mid:M": "omit"}}}, base_dir=tmp_path)
    with pytest.raises(ConfigError, match="cannot load"):
        load_scenario({**base, "workflow": {"definition": "missing.yaml", "orchestrator": "o"}}, base_dir=tmp_path)
    broken = wcp15.to_doc()
    broken["edges"].append(["C", "Z"])
    (tmp_path / "b.yaml").write_text(yaml.safe_dump(broken))
    with pytest.raises(ConfigError, match="does not validate"):
        load_scenario({**base, "workflow": {"definition": "b.yaml", "orchestrator": "o"}}, base_dir=tmp_path)


def test_unparseable_file(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text("protocol: [unclosed\n")
    with pytest.raises(ConfigError, match="parse"):
        load_scenario(p)
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "nope.yaml")
    with pytest.raises(ConfigError):
        resolve("no-such-scenario")


def test_traces_carry_no_key_material(wcp1):
    res = run_case(wcp1, "o", seed=3)
    text = res.trace.to_text()
    handle = res.setup.scopes["x"]
    for m in handle.members:
        assert handle.key_for(m).key.hex() not in text
    # the sealed output of A never shows up in the clear
    assert "x@case1" not in text and b"x@case1".hex() not in text
