"""Builtin example systems: three tanks, the shared-component sweep, two-phase commit."""

from __future__ import annotations

import itertools
import re

from .errors import UnknownModel
from .ltl import Always, And, Atom, Formula, Not, Until, implies
from .model import ComponentSpec, SchedulerSpec, SystemSpec, beta_label, validate_system

BETA = "beta"


def component(cid: str, ready, busy, transitions, initial: str, props=None, internal: str = BETA) -> ComponentSpec:
    """Build a component; every ready state is its own proposition unless ``props`` says otherwise."""
    ready = frozenset(ready)
    actions = frozenset(a for _, a, _ in transitions if a != internal)
    if props is None:
        props = {q: frozenset([q]) for q in ready}
    return ComponentSpec(
        id=cid,
        ready_states=ready,
        busy_states=frozenset(busy),
        actions=actions,
        internal_action=internal,
        transitions=frozenset(transitions),
        initial=initial,
        atomic_props={q: frozenset(v) for q, v in props.items()},
    )


def assemble(components, interactions: dict, owners: dict, scheduler_ids, scheduler_lts: dict | None = None) -> SystemSpec:
    """Wire components and interactions to schedulers.

    ``owners`` maps each interaction to a scheduler id. Schedulers missing from
    ``scheduler_lts`` get a one-state LTS accepting every label in their alphabet.
    """
    scheduler_lts = scheduler_lts or {}
    scopes = {sid: set() for sid in scheduler_ids}
    for a, sid in owners.items():
        scopes[sid] |= {c for c, _ in interactions[a]}
    schedulers = []
    for sid in scheduler_ids:
        managed = frozenset(a for a, s in owners.items() if s == sid)
        scope = frozenset(scopes[sid])
        if sid in scheduler_lts:
            initial, transitions = scheduler_lts[sid]
        else:
            initial = "s0"
            labels = sorted(managed) + [beta_label(c) for c in sorted(scope)]
            transitions = {("s0", lab, "s0") for lab in labels}
        schedulers.append(SchedulerSpec(sid, managed, scope, frozenset(transitions), initial))
    return SystemSpec(
        components=tuple(components),
        schedulers=tuple(schedulers),
        interactions={a: frozenset(v) for a, v in interactions.items()},
        managed=dict(owners),
    )


def tank(i: int) -> ComponentSpec:
    d, f = f"d{i}", f"f{i}"
    db, fb = f"{d}_busy", f"{f}_busy"
    return component(
        f"tank{i}",
        ready=[d, f],
        busy=[db, fb],
        transitions=[(d, "fil", db), (db, BETA, f), (f, "drain", fb), (fb, BETA, d)],
        initial=d,
    )


def tanks3() -> SystemSpec:
    interactions = {
        "drain1": {("tank1", "drain")},
        "fil12": {("tank1", "fil"), ("tank2", "fil")},
        "drain23": {("tank2", "drain"), ("tank3", "drain")},
        "fil3": {("tank3", "fil")},
    }
    owners = {"drain1": "S1", "fil12": "S1", "fil3": "S2", "drain23": "S2"}

    def lts(own_beta, mine, joint):
        b2 = beta_label("tank2")
        return "l0", {
            ("l0", b2, "l0"), ("l1", b2, "l1"), ("l1", own_beta, "l0"), ("l2", b2, "l1"),
            ("l3", b2, "l0"), ("l2", own_beta, "l3"), ("l3", mine, "l2"), ("l0", mine, "l1"),
            ("l0", joint, "l2"),
        }

    lts_table = {
        "S1": lts(beta_label("tank1"), "drain1", "fil12"),
        "S2": lts(beta_label("tank3"), "fil3", "drain23"),
    }
    return assemble([tank(1), tank(2), tank(3)], interactions, owners, ["S1", "S2"], lts_table)


def sweep(shared: int) -> SystemSpec:
    """Four components running action1·action2·action1; ``shared`` of them hand action2 to the next scheduler."""
    if not 0 <= shared <= 4:
        raise UnknownModel(f"sweep needs 0..4 shared components, got {shared}")
    comps, interactions, owners = [], {}, {}
    for i in range(1, 5):
        comps.append(
            component(
                f"comp{i}",
                ready=["r0", "r1", "r2", "r3"],
                busy=["b0", "b1", "b2"],
                transitions=[
                    ("r0", "action1", "b0"), ("b0", BETA, "r1"),
                    ("r1", "action2", "b1"), ("b1", BETA, "r2"),
                    ("r2", "action1", "b2"), ("b2", BETA, "r3"),
                ],
                initial="r0",
            )
        )
        interactions[f"comp{i}_action1"] = {(f"comp{i}", "action1")}
        interactions[f"comp{i}_action2"] = {(f"comp{i}", "action2")}
        owners[f"comp{i}_action1"] = f"sched{i}"
        owners[f"comp{i}_action2"] = f"sched{i % 4 + 1}" if i <= shared else f"sched{i}"
    return assemble(comps, interactions, owners, [f"sched{i}" for i in range(1, 5)])


def tpc(n: int, faults: bool = False) -> SystemSpec:
    """Two-phase commit: a client, a transaction manager ``tm`` and ``n`` resource managers.

    The coordinator scheduler runs ``begin``, the vote-gathering interactions
    and ``release``; each resource manager votes under its own scheduler.
    With ``faults`` the coordinator also owns the two faulty gatherings.
    """
    if n < 1:
        raise UnknownModel("tpc needs at least one resource manager")
    client = component(
        "client",
        ready=["idle", "waiting"],
        busy=["c_req", "c_done"],
        transitions=[("idle", "begin", "c_req"), ("c_req", BETA, "waiting"),
                     ("waiting", "release", "c_done"), ("c_done", BETA, "idle")],
        initial="idle",
    )
    tm = component(
        "tm",
        ready=["t_idle", "collect", "gc", "ga"],
        busy=["t_b", "t_c", "t_a", "t_rc", "t_ra"],
        transitions=[
            ("t_idle", "begin", "t_b"), ("t_b", BETA, "collect"),
            ("collect", "gather_commit", "t_c"), ("t_c", BETA, "gc"),
            ("collect", "gather_abort", "t_a"), ("t_a", BETA, "ga"),
            ("gc", "release", "t_rc"), ("t_rc", BETA, "t_idle"),
            ("ga", "release", "t_ra"), ("t_ra", BETA, "t_idle"),
        ],
        initial="t_idle",
        props={"t_idle": [], "collect": [], "gc": ["GlobalCommit"], "ga": ["GlobalAbort"]},
    )
    rms = [
        component(
            f"rm{i}",
            ready=["idle", "working", "lc", "la", "wait"],
            busy=["r_b", "r_c", "r_a", "r_rc", "r_ra", "r_done"],
            transitions=[
                ("idle", "begin", "r_b"), ("r_b", BETA, "working"),
                ("working", "vote_commit", "r_c"), ("r_c", BETA, "lc"),
                ("working", "vote_abort", "r_a"), ("r_a", BETA, "la"),
                ("lc", "report_commit", "r_rc"), ("r_rc", BETA, "wait"),
                ("la", "report_abort", "r_ra"), ("r_ra", BETA, "wait"),
                ("wait", "release", "r_done"), ("r_done", BETA, "idle"),
            ],
            initial="idle",
            props={"idle": [], "working": [], "lc": ["LocalCommit"], "la": ["LocalAbort"], "wait": []},
        )
        for i in range(1, n + 1)
    ]
    everyone = {("client", "begin"), ("tm", "begin")} | {(f"rm{i}", "begin") for i in range(1, n + 1)}
    interactions = {
        "begin": everyone,
        "release": {(c, "release") for c, _ in everyone},
    }
    owners = {"begin": "coord", "release": "coord"}
    for votes in itertools.product("ca", repeat=n):
        name = "gather_" + "".join(votes)
        decision = "gather_commit" if all(v == "c" for v in votes) else "gather_abort"
        parts = {("tm", decision)} | {
            (f"rm{i}", "report_commit" if v == "c" else "report_abort") for i, v in enumerate(votes, start=1)
        }
        interactions[name] = parts
        owners[name] = "coord"
    if faults:
        # commit although somebody voted abort, and abort although all voted commit
        interactions["bad_commit"] = {("tm", "gather_commit"), ("rm1", "report_abort")} | {
            (f"rm{i}", "report_commit") for i in range(2, n + 1)
        }
        interactions["bad_abort"] = {("tm", "gather_abort")} | {(f"rm{i}", "report_commit") for i in range(1, n + 1)}
        owners["bad_commit"] = owners["bad_abort"] = "coord"
    for i in range(1, n + 1):
        for kind in ("commit", "abort"):
            name = f"vote_{kind}_{i}"
            interactions[name] = {(f"rm{i}", f"vote_{kind}")}
            owners[name] = f"voter{i}"
    return assemble([client, tm, *rms], interactions, owners, ["coord"] + [f"voter{i}" for i in range(1, n + 1)])


def tpc_properties(n: int) -> dict:
    """The abort and commit obligations as formulas ``{"phi2": ..., "phi3": ...}``."""
    la = [Atom(f"rm{i}", "LocalAbort") for i in range(1, n + 1)]
    lc = [Atom(f"rm{i}", "LocalCommit") for i in range(1, n + 1)]
    gc, ga = Atom("tm", "GlobalCommit"), Atom("tm", "GlobalAbort")

    def conj(items):
        out = items[0]
        for x in items[1:]:
            out = And(out, x)
        return out

    phi2 = Always(conj([implies(la[i], Until(And(Not(lc[i]), Not(gc)), ga)) for i in range(n)]))
    phi3 = Always(implies(conj(lc), Until(And(conj([Not(x) for x in la]), Not(ga)), gc)))
    return {"phi2": phi2, "phi3": phi3}


_TAG = re.compile(r"^\s*(tanks3|sweep|tpc)\s*(?:\(\s*(\d+)\s*\)|:(\d+))?\s*$")


def build_model(tag: str) -> SystemSpec:
    """``tanks3``, ``sweep(k)`` with k in 0..4, or ``tpc(n)``."""
    m = _TAG.match(tag)
    if not m:
        raise UnknownModel(f"unknown model {tag!r}")
    name, arg = m.group(1), m.group(2) or m.group(3)
    if name == "tanks3":
        if arg is not None:
            raise UnknownModel("tanks3 takes no argument")
        spec = tanks3()
    elif arg is None:
        raise UnknownModel(f"{name} needs an argument")
    elif name == "sweep":
        spec = sweep(int(arg))
    else:
        spec = tpc(int(arg))
    problems = validate_system(spec)
    if problems:
        raise UnknownModel("builtin model failed validation: " + "; ".join(problems))
    return spec


def property_formula(name: str, spec_tag: str) -> Formula:
    """Named builtin properties, e.g. ``phi2`` for a tpc model."""
    m = _TAG.match(spec_tag)
    if m and m.group(1) == "tpc":
        props = tpc_properties(int(m.group(2) or m.group(3)))
        if name in props:
            return props[name]
    raise UnknownModel(f"no builtin property {name!r} for {spec_tag}")


__all__ = ["tanks3", "sweep", "tpc", "tpc_properties", "assemble", "component", "build_model", "property_formula"]
