"""Deterministic scenario runner.

A scenario picks global actions with a policy, pushes them through the
instrumented system, reorders the emitted events across schedulers (never
within one scheduler), and feeds the result to a lattice.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

from .errors import BudgetExceeded, UnknownFault, UnknownModel
from .instrumentation import initial_instrumented, instrumented_step
from .lattice import Lattice
from .ltl import Formula
from .model import GlobalAction, PartialTrace, SystemSpec, _beta_move, _interaction_move, enabled_global_actions, sorted_actions, step


@dataclass(frozen=True)
class Scenario:
    system: SystemSpec
    policy: str = "eager-roundrobin"
    seed: int = 0
    script: tuple = ()
    delivery: str = "roundrobin"
    delivery_seed: int = 0
    delivery_script: tuple = ()
    steps: int = 100
    property: Formula | None = None
    prune: bool = True


@dataclass
class RunResult:
    trace: PartialTrace
    events: list
    streams: dict
    lattice: Lattice
    report: dict = field(default_factory=dict)


class EagerRoundRobin:
    """Every scheduler takes at most one label per step; steps are maximal.

    Schedulers are visited from the highest index down. Each takes its first
    enabled label that does not clash with earlier picks, preferring its home
    components (those whose initial interaction it manages): home internal
    step, home interaction, other internal step, other interaction, ties
    broken by name.
    """

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.home = {j: home_components(spec, j) for j in range(1, spec.m + 1)}

    def _candidates(self, j: int) -> list:
        spec, home = self.spec, self.home[j]
        out = []
        for c in sorted(spec.scope(j)):
            out.append((0 if c in home else 2, "b", c))
        for a in sorted(spec.managed_by(j)):
            out.append((1 if spec.involved(a) & home else 3, "a", a))
        return sorted(out)

    def choose(self, g_state) -> GlobalAction | None:
        spec = self.spec
        comps: set = set()
        scheds: set = set()
        alpha, beta = [], []
        for j in range(spec.m, 0, -1):
            if j in scheds:
                continue
            for _, kind, name in self._candidates(j):
                mv = _interaction_move(spec, g_state, name) if kind == "a" else _beta_move(spec, g_state, name)
                if mv is None or comps & mv[0].keys() or scheds & mv[1].keys():
                    continue
                comps |= mv[0].keys()
                scheds |= mv[1].keys()
                (alpha if kind == "a" else beta).append(name)
                break
        if not alpha and not beta:
            return None
        return GlobalAction(frozenset(alpha), frozenset(beta))


def home_components(spec: SystemSpec, j: int) -> frozenset:
    """Components that can start with an interaction managed by scheduler ``j``."""
    init = spec.initial_state()
    out = set()
    for a in spec.managed_by(j):
        for cid, port in spec.interactions[a]:
            comp = spec.component(cid)
            if comp.successor(init.components[spec.component_index(cid)], port) is not None:
                out.add(cid)
    return frozenset(out)


class RandomPolicy:
    def __init__(self, spec: SystemSpec, seed: int):
        self.spec = spec
        self.rng = random.Random(seed)

    def choose(self, g_state):
        options = sorted_actions(enabled_global_actions(self.spec, g_state))
        return self.rng.choice(options) if options else None


class ScriptedPolicy:
    def __init__(self, spec: SystemSpec, script):
        self.spec = spec
        self.script = list(script)
        self.pos = 0

    def choose(self, g_state):
        if self.pos >= len(self.script):
            return None
        g = self.script[self.pos]
        self.pos += 1
        return g


def make_policy(s: Scenario):
    if s.policy == "eager-roundrobin":
        return EagerRoundRobin(s.system)
    if s.policy == "random":
        return RandomPolicy(s.system, s.seed)
    if s.policy == "scripted":
        return ScriptedPolicy(s.system, s.script)
    raise ValueError(f"unknown policy {s.policy!r}")


def execute(s: Scenario):
    """Run the policy through the instrumented system; returns (trace, events in emission order)."""
    spec = s.system
    policy = make_policy(s)
    ist = initial_instrumented(spec)
    trace = PartialTrace((ist.base.components,))
    events = []
    for _ in range(s.steps):
        g = policy.choose(ist.base)
        if g is None:
            break
        ist, evs = instrumented_step(spec, ist, g)
        events.extend(evs)
        trace = trace.append(g, ist.base.components)
    return trace, events


def split_streams(events, m: int) -> dict:
    streams = {j: [] for j in range(1, m + 1)}
    for e in events:
        streams[e.sender].append(e)
    return streams


def deliver(streams: dict, how: str = "roundrobin", seed: int = 0, script=(), emitted=None) -> list:
    """Interleave per-scheduler streams.

    ``roundrobin`` takes one event per non-empty stream in turn, ``random``
    picks a random non-empty stream each time, ``scripted`` follows a list of
    sender indices, ``emission`` keeps the order the events were produced in.
    """
    queues = {j: list(evs) for j, evs in streams.items()}
    out = []
    if how == "emission":
        return list(emitted)
    if how == "roundrobin":
        while any(queues.values()):
            for j in sorted(queues):
                if queues[j]:
                    out.append(queues[j].pop(0))
        return out
    if how == "random":
        rng = random.Random(seed)
        while any(queues.values()):
            j = rng.choice([k for k in sorted(queues) if queues[k]])
            out.append(queues[j].pop(0))
        return out
    if how == "scripted":
        for j in script:
            if not queues.get(j):
                raise ValueError(f"scripted delivery takes from empty stream {j}")
            out.append(queues[j].pop(0))
        if any(queues.values()):
            raise ValueError("scripted delivery leaves events undelivered")
        return out
    raise ValueError(f"unknown delivery {how!r}")


def run_scenario(s: Scenario) -> RunResult:
    trace, events = execute(s)
    streams = split_streams(events, s.system.m)
    delivered = deliver(streams, s.delivery, s.delivery_seed, s.delivery_script, emitted=events)
    lat = Lattice(s.system, s.property, prune=s.prune)
    lat.feed(delivered)
    return RunResult(trace, delivered, streams, lat, lat.report())


def count_interleavings(lengths) -> int:
    total = math.factorial(sum(lengths))
    for n in lengths:
        total //= math.factorial(n)
    return total


def enumerate_deliveries(streams, bound: int = 100_000):
    """Yield every merge of the given streams that keeps each stream's order."""
    if isinstance(streams, dict):
        streams = [streams[k] for k in sorted(streams)]
    streams = [list(s) for s in streams]
    if count_interleavings([len(s) for s in streams]) > bound:
        raise BudgetExceeded("too many interleavings")

    def rec(pos):
        if all(p == len(s) for p, s in zip(pos, streams)):
            yield []
            return
        for k, s in enumerate(streams):
            if pos[k] < len(s):
                nxt = list(pos)
                nxt[k] += 1
                for rest in rec(nxt):
                    yield [s[pos[k]]] + rest

    yield from rec([0] * len(streams))


# -- faults -------------------------------------------------------------------

FAULTS = ("commit-after-abort", "skip-global-commit")


def _tpc_size(spec: SystemSpec) -> int:
    names = [c.id for c in spec.components]
    if "tm" not in names or "client" not in names:
        raise UnknownModel("fault injection needs a tpc model")
    return sum(1 for c in names if c.startswith("rm"))


def _settle(spec: SystemSpec, g_state, script: list):
    """Append internal-action steps until every component is ready."""
    while True:
        betas = [g for g in enabled_global_actions(spec, g_state) if not g.alpha]
        if not betas:
            return g_state
        g = max(betas, key=lambda x: (len(x.beta), sorted(x.beta)))
        script.append(g)
        g_state = step(spec, g_state, g)


def tpc_transaction(spec: SystemSpec, g_state, votes: str, gather: str, script: list):
    n = len(votes)

    def fire(*names):
        nonlocal g_state
        g = GlobalAction(frozenset(names), frozenset())
        script.append(g)
        g_state = step(spec, g_state, g)
        g_state = _settle(spec, g_state, script)

    fire("begin")
    fire(*[f"vote_{'commit' if v == 'c' else 'abort'}_{i}" for i, v in enumerate(votes, start=1)])
    fire(gather)
    fire("release")
    return g_state


def inject_fault(s: Scenario, fault: str) -> Scenario:
    """Scripted tpc run with a misbehaving transaction manager.

    ``commit-after-abort``: rm1 votes abort, the manager commits anyway.
    ``skip-global-commit``: everybody votes commit, the manager aborts.
    A healthy transaction follows so the run ends stabilized.
    """
    if fault not in FAULTS:
        raise UnknownFault(f"unknown fault {fault!r}")
    from .models import tpc

    n = _tpc_size(s.system)
    spec = tpc(n, faults=True)
    script: list = []
    g_state = spec.initial_state()
    if fault == "commit-after-abort":
        g_state = tpc_transaction(spec, g_state, "a" + "c" * (n - 1), "bad_commit", script)
    else:
        g_state = tpc_transaction(spec, g_state, "c" * n, "bad_abort", script)
    tpc_transaction(spec, g_state, "c" * n, "gather_" + "c" * n, script)
    return replace(s, system=spec, policy="scripted", script=tuple(script), steps=len(script))


def healthy_tpc_script(spec: SystemSpec, rounds) -> tuple:
    """Scripted fault-free transactions; ``rounds`` lists vote strings such as ``"cac"``."""
    script: list = []
    g_state = spec.initial_state()
    for votes in rounds:
        gather = "gather_" + votes
        g_state = tpc_transaction(spec, g_state, votes, gather, script)
    return tuple(script)


__all__ = [
    "Scenario", "RunResult", "run_scenario", "execute", "deliver", "enumerate_deliveries",
    "count_interleavings", "inject_fault", "healthy_tpc_script", "EagerRoundRobin", "FAULTS",
    "home_components",
]
