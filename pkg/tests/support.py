"""Shared fixtures for the test suite: the two tank traces and random small systems."""

import random

from latticemon.instrumentation import run_instrumented
from latticemon.lattice import Lattice
from latticemon.ltl import Always, And, Atom, Eventually, Next, Not, Or, Until, fold, prog_oracle
from latticemon.model import (
    GlobalAction, PartialTrace, _upd, compatible_traces, enabled_global_actions, lattice_view, refine,
    run_actions, sorted_actions, step, validate_system,
)
from latticemon.models import assemble, component, tanks3
from latticemon.sim import RandomPolicy


def G(alpha=(), beta=()):
    return GlobalAction(frozenset(alpha), frozenset(beta))


T1_ACTIONS = (G({"fil12"}), G((), {"tank1"}), G({"drain1", "fil3"}), G((), {"tank2"}))
T2_ACTIONS = (G({"fil12", "fil3"}), G((), {"tank3"}), G((), {"tank2"}), G({"drain23"}, {"tank1"}))

PHI_TEXT = "G(tank3.d3 | tank1.f1)"


def tank_trace(name):
    spec = tanks3()
    actions = T1_ACTIONS if name == "t1" else T2_ACTIONS
    trace, _ = run_actions(spec, actions)
    return spec, trace


def random_system(seed: int):
    """At most 4 components and 3 schedulers, one-state schedulers, cyclic components."""
    rng = random.Random(seed)
    n = rng.randint(1, 4)
    m = rng.randint(1, 3)
    comps, ports = [], []
    for i in range(n):
        k = rng.randint(1, 3)
        ready = [f"r{x}" for x in range(k)]
        busy = [f"b{x}" for x in range(k)]
        trans = []
        for x in range(k):
            act = f"a{x}"
            trans.append((ready[x], act, busy[x]))
            trans.append((busy[x], "beta", ready[(x + 1) % k]))
            ports.append((f"c{i}", act))
        if k > 1 and rng.random() < 0.5:
            # a branch back to the start
            trans.append((ready[0], "skip", "bs"))
            trans.append(("bs", "beta", ready[k - 1]))
            busy.append("bs")
            ports.append((f"c{i}", "skip"))
        comps.append(component(f"c{i}", ready, busy, trans, "r0"))
    rng.shuffle(ports)
    interactions = {}
    for idx, port in enumerate(ports):
        # join an earlier interaction when it has no port of the same component
        joinable = [a for a, ps in interactions.items() if all(c != port[0] for c, _ in ps)]
        if joinable and rng.random() < 0.35:
            interactions[rng.choice(sorted(joinable))].add(port)
        else:
            interactions[f"i{idx}"] = {port}
    scheds = [f"S{j}" for j in range(1, m + 1)]
    owners = {a: rng.choice(scheds) for a in sorted(interactions)}
    used = [s for s in scheds if s in owners.values()]
    spec = assemble(comps, interactions, owners, used)
    assert validate_system(spec) == [], validate_system(spec)
    return spec


def random_trace(spec, seed: int, length: int = 6):
    policy = RandomPolicy(spec, seed)
    g_state = spec.initial_state()
    actions = []
    for _ in range(length):
        g = policy.choose(g_state)
        if g is None:
            break
        actions.append(g)
        _, g_state = run_actions(spec, actions)
    trace, _ = run_actions(spec, actions)
    return trace


def random_formula(spec, rng: random.Random, depth: int = 3):
    atoms = [Atom(c.id, p) for c in spec.components for p in sorted({x for v in c.atomic_props.values() for x in v})]

    def go(d):
        if d == 0 or rng.random() < 0.3:
            return rng.choice(atoms)
        op = rng.choice(["not", "and", "or", "X", "G", "F", "U"])
        if op == "not":
            return Not(go(d - 1))
        if op in ("and", "or", "U"):
            cls = {"and": And, "or": Or, "U": Until}[op]
            return cls(go(d - 1), go(d - 1))
        return {"X": Next, "G": Always, "F": Eventually}[op](go(d - 1))

    return go(depth)


def lattice_paths_as_traces(lat):
    return {(tuple(states), tuple(labels)) for states, labels in lat.paths()}


def views(spec, traces):
    out = set()
    for t in traces:
        v = lattice_view(spec, refine(spec, t))
        out.add((v.states, v.actions))
    return out


def oracle_paths(spec, trace):
    return views(spec, compatible_traces(spec, trace))


def check_completeness(spec, trace, formulas=(), oracle=compatible_traces):
    """Mismatches between the unpruned lattice and ``oracle``'s traces (empty when they agree).

    Formula bags are compared as sets.
    """
    _, log, _ = run_instrumented(spec, trace.actions)
    problems = []
    expected = oracle(spec, trace)
    got = lattice_paths_as_traces(Lattice(spec, prune=False).feed(log))
    want = views(spec, expected)
    if got != want:
        problems.append(f"paths differ: lattice {len(got)}, oracle {len(want)}, common {len(got & want)}")
    for phi in formulas:
        bag = set(Lattice(spec, phi, prune=False).feed(log).frontier.formulas)
        if bag != {prog_oracle(phi, t, spec) for t in expected}:
            problems.append(f"bag differs for {phi}")
    return problems




# -- happened-before oracle ---------------------------------------------------
#
# Causality is rebuilt from the controller messages alone (program order of
# each scheduler, and the shared component's clock reaching a scheduler that
# sees its internal action without having run its last interaction), then
# every execution respecting it is enumerated.


def interaction_occurrences(spec, trace):
    """``[(interaction, scheduler, step index)]`` in trace order, plus the causal predecessors of each."""
    occ = []
    preds = []
    last_manager = {}
    history = {}  # component -> occurrence ids that involved it so far
    pending = {j: set() for j in range(1, spec.m + 1)}  # inherited by the next interaction of j
    last_of = {}
    for pos, g in enumerate(trace.actions):
        assert isinstance(g, GlobalAction)
        for a in sorted(g.alpha):
            j = spec.manager(a)
            k = len(occ)
            occ.append((a, j, pos))
            p = set(pending[j])
            if j in last_of:
                p.add(last_of[j])
            preds.append(p)
            pending[j] = set()
            last_of[j] = k
            for cid in spec.involved(a):
                history.setdefault(cid, []).append(k)
                last_manager[cid] = j
        for cid in sorted(g.beta):
            if cid not in spec.shared:
                continue
            for j in spec.observers(cid):
                if last_manager.get(cid) != j:
                    pending[j] |= set(history.get(cid, []))
    # transitive closure
    closed = []
    for k, p in enumerate(preds):
        full = set(p)
        for x in p:
            full |= closed[x]
        closed.append(full)
    return occ, closed


def causal_traces(spec, trace):
    """One execution per refined shape among those that keeps each scheduler's interaction order, the causality above and the final state.

    Where an internal action sits between two interactions of its component
    does not change the refined trace, so each one is taken right after the
    interaction it completes (unless the component ends busy).
    """
    occ, before = interaction_occurrences(spec, trace)
    per_sched = {j: [k for k, (_, s, _) in enumerate(occ) if s == j] for j in range(1, spec.m + 1)}
    final = tuple(trace.states[-1])
    ends_busy = {
        c.id for pos, c in enumerate(spec.components) if c.is_busy(final[pos])
    }
    last_use = {}
    for k, (a, _, _) in enumerate(occ):
        for cid in spec.involved(a):
            last_use[cid] = k
    start = spec.initial_state()
    found = {}
    level = {(start, frozenset(), ((start.components,), ())): PartialTrace((start.components,))}
    while level:
        nxt_level = {}
        for (g_state, done, (states, actions)), raw in level.items():
            if len(done) == len(occ):
                if g_state.components == final:
                    found.setdefault((states, actions), raw)
                continue
            for g in sorted_actions(enabled_global_actions(spec, g_state)):
                if g.beta:
                    continue
                ids = []
                for a in g.alpha:
                    todo = [k for k in per_sched[spec.manager(a)] if k not in done]
                    if not todo or occ[todo[0]][0] != a or not before[todo[0]] <= done:
                        break
                    ids.append(todo[0])
                else:
                    new = step(spec, g_state, g)
                    run = raw.append(g, new.components)
                    st, ac = states + (new.components,), actions + (frozenset(g.alpha),)
                    finishing = frozenset(
                        cid for k in ids for cid in spec.involved(occ[k][0])
                        if not (cid in ends_busy and last_use[cid] == k)
                    )
                    # one at a time: a scheduler takes one step per global action
                    for cid in sorted(finishing):
                        b = GlobalAction(frozenset(), frozenset({cid}))
                        new = step(spec, new, b)
                        run = run.append(b, new.components)
                        st = tuple(_upd(spec, new.components, x) for x in st)
                    nxt_level.setdefault((new, done | frozenset(ids), (st, ac)), run)
        level = nxt_level
    return [found[k] for k in sorted(found, key=repr)]


def causal_paths(spec, trace):
    return views(spec, causal_traces(spec, trace))


# -- path counts from events alone ---------------------------------------------


def consistent_cuts(events, m):
    """Clock vectors ``c`` such that every action counted in ``c`` only depends on actions counted in ``c``."""
    import itertools

    clocks = {(e.sender, e.clock[e.sender - 1]): e.clock for e in events if hasattr(e, "clock")}
    top = [max([k for (j, k) in clocks if j == jj] or [0]) for jj in range(1, m + 1)]
    cuts = set()
    for c in itertools.product(*[range(t + 1) for t in top]):
        if all(all(x <= y for x, y in zip(clocks[(j, c[j - 1])], c)) for j in range(1, m + 1) if c[j - 1]):
            cuts.add(c)
    return cuts, tuple(top)


def dp_path_count(events, m):
    """Paths from the empty cut to the full one; a step may advance several
    coordinates at once when each single advance is itself a cut."""
    import itertools

    cuts, top = consistent_cuts(events, m)
    count = {}
    for c in sorted(cuts, key=sum):
        if not any(c):
            count[c] = 1
            continue
        total = 0
        live = [k for k in range(m) if c[k]]
        for r in range(1, len(live) + 1):
            for axes in itertools.combinations(live, r):
                src = tuple(x - (k in axes) for k, x in enumerate(c))
                if src in cuts and all(tuple(x + (i == k) for i, x in enumerate(src)) in cuts for k in axes):
                    total += count[src]
        count[c] = total
    return count[top]


__all__ = [
    "G", "T1_ACTIONS", "T2_ACTIONS", "PHI_TEXT", "tank_trace", "random_system", "random_trace",
    "random_formula", "check_completeness", "oracle_paths", "views", "lattice_paths_as_traces", "fold",
    "causal_paths", "causal_traces", "consistent_cuts", "dp_path_count", "interaction_occurrences",
]
