"""Sectioned run configuration and JSON system descriptions.

A config is an INI document::

    [system]
    model = tanks3            ; or: file = system.json

    [property]
    formula = G(d3 | f1)      ; or: builtin = phi2

    [atoms]
    d3 = tank3.d3
    f1 = tank1.f1

    [run]
    policy = eager-roundrobin ; random, scripted
    delivery = roundrobin     ; random, scripted, emission
    seed = 0
    steps = 100
    prune = on
    script = fil12+fil3, beta:tank1  ; only for policy = scripted

    [output]
    format = text             ; kv

Unknown sections or keys are errors, so typos do not pass silently.
"""

from __future__ import annotations

import configparser
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ParseError, UnknownModel
from .ltl import Formula, parse_formula
from .model import GlobalAction, SystemSpec, validate_system
from .models import assemble, build_model, component, property_formula

ALLOWED = {
    "system": {"model", "file"},
    "property": {"formula", "builtin"},
    "atoms": None,  # free-form bindings
    "run": {"policy", "delivery", "seed", "delivery_seed", "steps", "prune", "script", "delivery_script", "fault"},
    "output": {"format", "max_paths"},
}

_BOOL = {"on": True, "yes": True, "true": True, "1": True, "off": False, "no": False, "false": False, "0": False}


@dataclass
class RunConfig:
    system: SystemSpec
    model_tag: str | None = None
    formula: Formula | None = None
    formula_text: str | None = None
    bindings: dict = field(default_factory=dict)
    policy: str = "eager-roundrobin"
    delivery: str = "roundrobin"
    seed: int = 0
    delivery_seed: int = 0
    steps: int = 100
    prune: bool = True
    script: tuple = ()
    delivery_script: tuple = ()
    fault: str | None = None
    format: str = "text"
    max_paths: int = 10**6


def system_from_dict(doc: dict) -> SystemSpec:
    """Build a system from its JSON form.

    ``components`` is a list of ``{id, ready, busy, transitions, initial}``
    (optional ``props`` and ``internal``), ``interactions`` maps names to
    ``[component, action]`` pairs, ``owners`` maps names to scheduler ids.
    ``schedulers`` fixes the scheduler order; ``scheduler_lts`` optionally
    gives ``{initial, transitions}`` per scheduler.
    """
    try:
        comps = [
            component(
                c["id"],
                ready=c["ready"],
                busy=c["busy"],
                transitions=[tuple(t) for t in c["transitions"]],
                initial=c["initial"],
                props=c.get("props"),
                internal=c.get("internal", "beta"),
            )
            for c in doc["components"]
        ]
        interactions = {a: {tuple(p) for p in parts} for a, parts in doc["interactions"].items()}
        owners = dict(doc["owners"])
        sched_ids = list(doc.get("schedulers") or sorted(set(owners.values())))
        lts = {
            sid: (v["initial"], {tuple(t) for t in v["transitions"]})
            for sid, v in (doc.get("scheduler_lts") or {}).items()
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed system description: {exc!r}") from None
    unknown = set(owners.values()) - set(sched_ids)
    if unknown:
        raise ConfigError(f"owners name unknown schedulers {sorted(unknown)}")
    spec = assemble(comps, interactions, owners, sched_ids, lts)
    problems = validate_system(spec)
    if problems:
        raise ConfigError("invalid system: " + "; ".join(problems))
    return spec


def load_system_file(path) -> SystemSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", exc.lineno) from None
    return system_from_dict(doc)


def _parse_script(spec: SystemSpec, text: str) -> tuple:
    """``fil12+fil3, beta:tank1+beta:tank3, ...`` -> global actions.

    Steps are separated by commas or newlines; ``+`` joins the labels of one step.
    """
    out = []
    for chunk in re.split(r"[,\n]", text):
        chunk = chunk.strip()
        if not chunk:
            continue
        alpha, beta = set(), set()
        for name in chunk.split("+"):
            name = name.strip()
            if name.startswith("beta:"):
                beta.add(name[5:])
            elif name in spec.interactions:
                alpha.add(name)
            else:
                raise ConfigError(f"script names unknown interaction {name!r}")
        out.append(GlobalAction(frozenset(alpha), frozenset(beta)))
    return tuple(out)


def _int(sec, key, default):
    try:
        return sec.getint(key, default)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key} must be an integer") from None


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";",), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for name in cp.sections():
        if name not in ALLOWED:
            raise ConfigError(f"unknown section [{name}]")
        keys = ALLOWED[name]
        if keys is not None:
            for key in cp[name]:
                if key not in keys:
                    raise ConfigError(f"unknown key {key!r} in [{name}]")
    if not cp.has_section("system"):
        raise ConfigError("missing [system] section")
    sysec = cp["system"]
    if ("model" in sysec) == ("file" in sysec):
        raise ConfigError("[system] needs exactly one of model or file")
    tag = sysec.get("model")
    if tag is not None:
        try:
            spec = build_model(tag)
        except UnknownModel as exc:
            raise ConfigError(str(exc)) from None
    else:
        spec = load_system_file(Path(base_dir) / sysec["file"])

    bindings = {}
    if cp.has_section("atoms"):
        for name, target in cp["atoms"].items():
            comp, _, prop = target.partition(".")
            if not prop:
                raise ConfigError(f"atom {name} must be bound as component.prop")
            bindings[name] = (comp, prop)

    cfg = RunConfig(system=spec, model_tag=tag, bindings=bindings)
    if cp.has_section("property"):
        psec = cp["property"]
        if "formula" in psec and "builtin" in psec:
            raise ConfigError("[property] takes formula or builtin, not both")
        if "formula" in psec:
            cfg.formula_text = psec["formula"]
            cfg.formula = parse_formula(psec["formula"], bindings)
        elif "builtin" in psec:
            try:
                cfg.formula = property_formula(psec["builtin"], tag or "")
            except UnknownModel as exc:
                raise ConfigError(str(exc)) from None
            cfg.formula_text = psec["builtin"]

    if cp.has_section("run"):
        r = cp["run"]
        cfg.policy = r.get("policy", cfg.policy)
        cfg.delivery = r.get("delivery", cfg.delivery)
        cfg.seed = _int(r, "seed", 0)
        cfg.delivery_seed = _int(r, "delivery_seed", cfg.seed)
        cfg.steps = _int(r, "steps", cfg.steps)
        prune = r.get("prune", "on").lower()
        if prune not in _BOOL:
            raise ConfigError("[run] prune must be on or off")
        cfg.prune = _BOOL[prune]
        if "script" in r:
            cfg.script = _parse_script(spec, r["script"])
        if "delivery_script" in r:
            try:
                cfg.delivery_script = tuple(int(x) for x in r["delivery_script"].replace(",", " ").split())
            except ValueError:
                raise ConfigError("[run] delivery_script must list scheduler indices") from None
        cfg.fault = r.get("fault")
    if cfg.policy not in ("eager-roundrobin", "random", "scripted"):
        raise ConfigError(f"unknown policy {cfg.policy!r}")
    if cfg.delivery not in ("roundrobin", "random", "scripted", "emission"):
        raise ConfigError(f"unknown delivery {cfg.delivery!r}")

    if cp.has_section("output"):
        o = cp["output"]
        cfg.format = o.get("format", "text")
        cfg.max_paths = _int(o, "max_paths", cfg.max_paths)
    if cfg.format not in ("text", "kv"):
        raise ConfigError(f"unknown output format {cfg.format!r}")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)
