import json

import pytest

from latticemon import ConfigError, ParseError
from latticemon.config import load_config, load_system_file, parse_config, system_from_dict
from latticemon.ltl import parse_formula
from latticemon.model import GlobalAction
from latticemon.models import tpc_properties

TANKS = """
[system]
model = tanks3
[property]
formula = G(d3 | f1)
[atoms]
d3 = tank3.d3
f1 = tank1.f1
"""

TOY = {
    "components": [
        {"id": "a", "ready": ["r"], "busy": ["b"], "transitions": [["r", "go", "b"], ["b", "beta", "r"]], "initial": "r"},
        {"id": "c", "ready": ["x", "y"], "busy": ["z"],
         "transitions": [["x", "go", "z"], ["z", "beta", "y"]], "initial": "x", "props": {"x": ["low"], "y": ["high"]}},
    ],
    "interactions": {"sync": [["a", "go"], ["c", "go"]]},
    "owners": {"sync": "S"},
}


def test_defaults():
    cfg = parse_config("[system]\nmodel = tanks3\n")
    assert cfg.model_tag == "tanks3" and cfg.formula is None
    assert (cfg.policy, cfg.delivery, cfg.seed, cfg.steps, cfg.prune, cfg.format) == (
        "eager-roundrobin", "roundrobin", 0, 100, True, "text",
    )


def test_formula_with_bindings():
    cfg = parse_config(TANKS)
    assert cfg.formula == parse_formula("G(tank3.d3 | tank1.f1)")
    assert cfg.bindings == {"d3": ("tank3", "d3"), "f1": ("tank1", "f1")}


def test_builtin_property():
    cfg = parse_config("[system]\nmodel = tpc(2)\n[property]\nbuiltin = phi3\n")
    assert cfg.formula == tpc_properties(2)["phi3"]


def test_run_section():
    cfg = parse_config(
        "[system]\nmodel = tanks3\n[run]\npolicy = scripted\ndelivery = scripted\nseed = 5\nsteps = 3\n"
        "prune = off\nscript = fil12+fil3, beta:tank1\n  drain1\ndelivery_script = 1, 2 1\n"
        "[output]\nformat = kv\nmax_paths = 7\n"
    )
    assert cfg.script == (
        GlobalAction(frozenset({"fil12", "fil3"})), GlobalAction(frozenset(), frozenset({"tank1"})),
        GlobalAction(frozenset({"drain1"})),
    )
    assert cfg.delivery_script == (1, 2, 1)
    assert (cfg.seed, cfg.delivery_seed, cfg.steps, cfg.prune, cfg.format, cfg.max_paths) == (5, 5, 3, False, "kv", 7)


@pytest.mark.parametrize(
    "text",
    [
        "[system]\nmodel = tanks3\n[extra]\n",
        "[system]\nmodel = tanks3\nflavour = x\n",
        "[run]\nseed = 1\n",
        "[system]\n",
        "[system]\nmodel = tanks3\nfile = x.json\n",
        "[system]\nmodel = tanks9\n",
        "[system]\nmodel = tanks3\n[atoms]\nd3 = tank3\n",
        "[system]\nmodel = tanks3\n[property]\nformula = true\nbuiltin = phi2\n",
        "[system]\nmodel = tanks3\n[property]\nbuiltin = phi2\n",
        "[system]\nmodel = tanks3\n[run]\nseed = many\n",
        "[system]\nmodel = tanks3\n[run]\nprune = maybe\n",
        "[system]\nmodel = tanks3\n[run]\npolicy = lazy\n",
        "[system]\nmodel = tanks3\n[run]\ndelivery = carrier\n",
        "[system]\nmodel = tanks3\n[run]\nscript = fil99\n",
        "[system]\nmodel = tanks3\n[run]\ndelivery_script = a b\n",
        "[system]\nmodel = tanks3\n[output]\nformat = xml\n",
        "not an ini file",
    ],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_script_steps_may_sit_on_their_own_lines_with_comments():
    cfg = parse_config("[system]\nmodel = tanks3\n[run]\nscript = fil12 ; first\n  beta:tank1, fil3\n")
    assert [sorted(g.alpha | g.beta) for g in cfg.script] == [["fil12"], ["tank1"], ["fil3"]]


def test_formula_syntax_errors_surface_as_parse_errors():
    with pytest.raises(ParseError):
        parse_config("[system]\nmodel = tanks3\n[property]\nformula = G(\n")


def test_json_system(tmp_path):
    (tmp_path / "toy.json").write_text(json.dumps(TOY))
    (tmp_path / "run.ini").write_text("[system]\nfile = toy.json\n[property]\nformula = F c.high\n")
    cfg = load_config(tmp_path / "run.ini")
    assert [c.id for c in cfg.system.components] == ["a", "c"]
    assert cfg.system.m == 1 and cfg.system.shared == frozenset()


def test_bad_json_systems(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  nope")
    with pytest.raises(ParseError):
        load_system_file(bad)
    with pytest.raises(ConfigError):
        system_from_dict({"components": []})
    with pytest.raises(ConfigError):
        system_from_dict({**TOY, "schedulers": ["T"]})
    broken = json.loads(json.dumps(TOY))
    broken["components"][0]["initial"] = "b"
    with pytest.raises(ConfigError):
        system_from_dict(broken)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")
