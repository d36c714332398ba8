"""Component/scheduler systems, their global semantics, and partial traces.

A system is a set of components (each an LTS alternating between ready and
busy states) coordinated by schedulers that own disjoint sets of multi-party
interactions. Identifiers are plain strings. Scheduler indices are 1-based
wherever they appear as numbers (events, busy markers, clock positions are
the exception: clocks are ordinary 0-based tuples).
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property

from .errors import BudgetExceeded, NotEnabled

UNKNOWN = "?"
BETA_PREFIX = "beta:"


def beta_label(component_id: str) -> str:
    """Scheduler transition label for the internal action of a component."""
    return BETA_PREFIX + component_id


def is_beta_label(label: str) -> bool:
    return label.startswith(BETA_PREFIX)


@dataclass(frozen=True, order=True)
class Bot:
    """Busy marker: component ``comp`` is busy, its last action was run by scheduler ``k``."""

    comp: str
    k: int

    def __str__(self) -> str:
        return f"⊥{self.comp}^{self.k}"


@dataclass(frozen=True, eq=True)
class ComponentSpec:
    id: str
    ready_states: frozenset
    busy_states: frozenset
    actions: frozenset
    internal_action: str
    transitions: frozenset
    initial: str
    atomic_props: Mapping = field(default_factory=dict, compare=False)

    def __hash__(self) -> int:
        return hash((self.id, self.transitions))

    @cached_property
    def _succ(self) -> dict:
        table: dict = {}
        for src, act, dst in self.transitions:
            table.setdefault((src, act), []).append(dst)
        return table

    def successors(self, state: str, action: str) -> list:
        return self._succ.get((state, action), [])

    def successor(self, state: str, action: str) -> str | None:
        targets = self._succ.get((state, action))
        return targets[0] if targets else None

    def is_busy(self, state) -> bool:
        return isinstance(state, Bot) or state in self.busy_states

    def holds(self, state: str, prop: str) -> bool:
        return prop in self.atomic_props.get(state, ())

    @property
    def states(self) -> frozenset:
        return self.ready_states | self.busy_states


@dataclass(frozen=True)
class SchedulerSpec:
    id: str
    managed_interactions: frozenset
    notified_internals: frozenset
    transitions: frozenset
    initial: str

    @cached_property
    def _succ(self) -> dict:
        table: dict = {}
        for src, label, dst in self.transitions:
            table.setdefault((src, label), []).append(dst)
        return table

    def successor(self, state: str, label: str) -> str | None:
        targets = self._succ.get((state, label))
        return targets[0] if targets else None

    @property
    def states(self) -> frozenset:
        out = {self.initial}
        for src, _, dst in self.transitions:
            out.update((src, dst))
        return frozenset(out)


@dataclass(frozen=True)
class GlobalState:
    components: tuple
    schedulers: tuple


@dataclass(frozen=True)
class GlobalAction:
    """A set of interactions ``alpha`` and a set of components ``beta`` whose internal action fires."""

    alpha: frozenset = frozenset()
    beta: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "alpha", frozenset(self.alpha))
        object.__setattr__(self, "beta", frozenset(self.beta))

    def __bool__(self) -> bool:
        return bool(self.alpha or self.beta)

    def sort_key(self) -> tuple:
        return (sorted(self.alpha), sorted(self.beta))

    def __str__(self) -> str:
        parts = sorted(self.alpha) + [f"β[{c}]" for c in sorted(self.beta)]
        return "{" + ",".join(parts) + "}"


@dataclass(frozen=True)
class SystemSpec:
    components: tuple
    schedulers: tuple
    interactions: Mapping
    managed: Mapping

    def __hash__(self) -> int:
        return id(self)

    def __eq__(self, other) -> bool:
        return self is other

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def m(self) -> int:
        return len(self.schedulers)

    @cached_property
    def _comp_pos(self) -> dict:
        return {c.id: i for i, c in enumerate(self.components)}

    @cached_property
    def _sched_pos(self) -> dict:
        return {s.id: j + 1 for j, s in enumerate(self.schedulers)}

    def component_index(self, cid: str) -> int:
        return self._comp_pos[cid]

    def component(self, cid: str) -> ComponentSpec:
        return self.components[self._comp_pos[cid]]

    def scheduler_index(self, sid: str) -> int:
        return self._sched_pos[sid]

    def scheduler(self, j: int) -> SchedulerSpec:
        return self.schedulers[j - 1]

    def involved(self, interaction: str) -> frozenset:
        return frozenset(c for c, _ in self.interactions[interaction])

    def manager(self, interaction: str) -> int:
        """1-based index of the scheduler managing ``interaction``."""
        return self._sched_pos[self.managed[interaction]]

    def managed_by(self, j: int) -> frozenset:
        sid = self.schedulers[j - 1].id
        return frozenset(a for a, s in self.managed.items() if s == sid)

    @cached_property
    def _scopes(self) -> tuple:
        out = []
        for j in range(1, self.m + 1):
            comps: set = set()
            for a in self.managed_by(j):
                comps |= self.involved(a)
            out.append(frozenset(comps))
        return tuple(out)

    def scope(self, j: int) -> frozenset:
        return self._scopes[j - 1]

    @cached_property
    def shared(self) -> frozenset:
        return frozenset(c.id for c in self.components if len(self.observers(c.id)) >= 2)

    def observers(self, cid: str) -> tuple:
        """1-based indices of schedulers with ``cid`` in scope."""
        return tuple(j for j in range(1, self.m + 1) if cid in self._scopes[j - 1])

    def initial_state(self) -> GlobalState:
        return GlobalState(
            tuple(c.initial for c in self.components),
            tuple(s.initial for s in self.schedulers),
        )

    def is_busy(self, pos: int, state) -> bool:
        return self.components[pos].is_busy(state)


# -- validation ---------------------------------------------------------------


def validate_system(spec: SystemSpec) -> list:
    """Return a list of human-readable invariant violations (empty when valid)."""
    problems = []
    comp_ids = [c.id for c in spec.components]
    if len(set(comp_ids)) != len(comp_ids):
        problems.append("components: duplicate component id")
    for c in spec.components:
        where = f"component {c.id}"
        if c.ready_states & c.busy_states:
            problems.append(f"{where}: ready and busy states overlap")
        if c.initial not in c.ready_states:
            problems.append(f"{where}: initial state {c.initial} is not ready")
        if c.internal_action in c.actions:
            problems.append(f"{where}: internal action is also a port action")
        seen = set()
        for src, act, dst in sorted(c.transitions):
            if (src, act) in seen:
                problems.append(f"{where}: nondeterministic transition on ({src},{act})")
            seen.add((src, act))
            if src in c.ready_states and act in c.actions and dst in c.busy_states:
                continue
            if src in c.busy_states and act == c.internal_action and dst in c.ready_states:
                continue
            problems.append(f"{where}: alternation broken by ({src},{act},{dst})")
        for state in c.atomic_props:
            if state not in c.ready_states:
                problems.append(f"{where}: propositions attached to non-ready state {state}")

    owners: dict = {}
    for s in spec.schedulers:
        for a in s.managed_interactions:
            owners.setdefault(a, []).append(s.id)
    for a in sorted(spec.interactions):
        got = owners.get(a, [])
        if len(got) > 1:
            problems.append(f"interaction {a}: managed not single-valued ({','.join(sorted(got))})")
        if a not in spec.managed:
            problems.append(f"interaction {a}: managed not total")
        elif got and spec.managed[a] not in got:
            problems.append(f"interaction {a}: managed map disagrees with scheduler tables")
        elif not got:
            problems.append(f"interaction {a}: managed not total")
        per_comp: dict = {}
        for cid, act in spec.interactions[a]:
            per_comp[cid] = per_comp.get(cid, 0) + 1
            if cid not in comp_ids:
                problems.append(f"interaction {a}: unknown component {cid}")
            elif act not in spec.component(cid).actions:
                problems.append(f"interaction {a}: {act} is not an action of {cid}")
        for cid, count in per_comp.items():
            if count > 1:
                problems.append(f"interaction {a}: more than one action of {cid}")
    for a in owners:
        if a not in spec.interactions:
            problems.append(f"interaction {a}: managed but not declared")

    if problems:
        return problems
    for j, s in enumerate(spec.schedulers, start=1):
        where = f"scheduler {s.id}"
        scope = spec.scope(j)
        if frozenset(s.notified_internals) != scope:
            problems.append(f"{where}: notified internals differ from scope")
        allowed = set(s.managed_interactions) | {beta_label(c) for c in scope}
        seen = set()
        for src, label, dst in sorted(s.transitions):
            if label not in allowed:
                problems.append(f"{where}: transition label {label} outside its alphabet")
            if (src, label) in seen:
                problems.append(f"{where}: nondeterministic transition on ({src},{label})")
            seen.add((src, label))
    return problems


# -- global semantics ---------------------------------------------------------


def _interaction_move(spec: SystemSpec, state: GlobalState, a: str):
    j = spec.manager(a)
    nxt_s = spec.scheduler(j).successor(state.schedulers[j - 1], a)
    if nxt_s is None:
        return None
    comp_moves = {}
    for cid, act in spec.interactions[a]:
        pos = spec.component_index(cid)
        nxt = spec.components[pos].successor(state.components[pos], act)
        if nxt is None:
            return None
        comp_moves[pos] = nxt
    return comp_moves, {j: nxt_s}


def _beta_move(spec: SystemSpec, state: GlobalState, cid: str):
    pos = spec.component_index(cid)
    comp = spec.components[pos]
    nxt = comp.successor(state.components[pos], comp.internal_action)
    if nxt is None:
        return None
    sched_moves = {}
    for j in spec.observers(cid):
        nxt_s = spec.scheduler(j).successor(state.schedulers[j - 1], beta_label(cid))
        if nxt_s is None:
            return None
        sched_moves[j] = nxt_s
    return {pos: nxt}, sched_moves


def _moves(spec: SystemSpec, state: GlobalState) -> list:
    out = []
    for a in sorted(spec.interactions):
        mv = _interaction_move(spec, state, a)
        if mv is not None:
            out.append((("a", a), mv))
    for c in spec.components:
        mv = _beta_move(spec, state, c.id)
        if mv is not None:
            out.append((("b", c.id), mv))
    return out


def enabled_global_actions(spec: SystemSpec, state: GlobalState) -> set:
    """Every nonempty combination of enabled moves touching each component and scheduler at most once."""
    moves = _moves(spec, state)
    result = set()

    def grow(start, comps, scheds, chosen):
        for idx in range(start, len(moves)):
            (kind, name), (cm, sm) = moves[idx]
            if comps & cm.keys() or scheds & sm.keys():
                continue
            picked = chosen + [(kind, name)]
            result.add(
                GlobalAction(
                    frozenset(n for k, n in picked if k == "a"),
                    frozenset(n for k, n in picked if k == "b"),
                )
            )
            grow(idx + 1, comps | cm.keys(), scheds | sm.keys(), picked)

    grow(0, frozenset(), frozenset(), [])
    return result


def sorted_actions(actions: Iterable) -> list:
    return sorted(actions, key=GlobalAction.sort_key)


def step(spec: SystemSpec, state: GlobalState, action: GlobalAction) -> GlobalState:
    if not action:
        raise NotEnabled("empty global action")
    comps = list(state.components)
    scheds = list(state.schedulers)
    touched_c: set = set()
    touched_s: set = set()
    parts = [("a", a) for a in sorted(action.alpha)] + [("b", c) for c in sorted(action.beta)]
    for kind, name in parts:
        try:
            mv = _interaction_move(spec, state, name) if kind == "a" else _beta_move(spec, state, name)
        except KeyError as exc:
            raise NotEnabled(f"unknown element {name}") from exc
        if mv is None:
            raise NotEnabled(f"{name} is not enabled")
        cm, sm = mv
        if touched_c & cm.keys() or touched_s & sm.keys():
            raise NotEnabled(f"{action} makes a component or scheduler step twice")
        touched_c |= cm.keys()
        touched_s |= sm.keys()
        for pos, q in cm.items():
            comps[pos] = q
        for j, q in sm.items():
            scheds[j - 1] = q
    return GlobalState(tuple(comps), tuple(scheds))


# -- traces -------------------------------------------------------------------


@dataclass(frozen=True)
class PartialTrace:
    """Alternating sequence ``states[0] · actions[0] · states[1] · ...``."""

    states: tuple
    actions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(tuple(s) for s in self.states))
        object.__setattr__(self, "actions", tuple(self.actions))
        if len(self.states) != len(self.actions) + 1:
            raise ValueError("a trace needs exactly one more state than actions")

    @property
    def last(self) -> tuple:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.actions)

    def append(self, action, state) -> "PartialTrace":
        return PartialTrace(self.states + (tuple(state),), self.actions + (action,))

    def render(self, spec: SystemSpec | None = None) -> str:
        def cell(pos, q):
            if isinstance(q, Bot) or (spec is not None and q != UNKNOWN and spec.is_busy(pos, q)):
                return "⊥"
            return str(q)

        def show(st):
            return "(" + ",".join(cell(p, q) for p, q in enumerate(st)) + ")"

        def label(g):
            if isinstance(g, GlobalAction):
                return str(g)
            return "{" + ",".join(sorted(g)) + "}"

        out = [show(self.states[0])]
        for g, st in zip(self.actions, self.states[1:]):
            out.append(label(g))
            out.append(show(st))
        return "·".join(out)

    def __str__(self) -> str:
        return self.render()


def run_actions(spec: SystemSpec, actions: Iterable, start: GlobalState | None = None):
    """Execute ``actions`` from ``start``; returns (trace, final global state)."""
    g_state = start or spec.initial_state()
    trace = PartialTrace((g_state.components,))
    for g in actions:
        g_state = step(spec, g_state, g)
        trace = trace.append(g, g_state.components)
    return trace, g_state


def observed_part(spec: SystemSpec, action: GlobalAction, j: int, last_manager: dict | None = None) -> GlobalAction:
    """What scheduler ``j`` sees of a global action.

    With ``last_manager`` (component -> manager of its latest interaction),
    only internal actions of components whose latest interaction ``j`` ran
    are seen; otherwise every internal action in the scope is.
    """
    beta = action.beta & spec.scope(j)
    if last_manager is not None:
        beta = frozenset(c for c in beta if last_manager.get(c) == j)
    return GlobalAction(action.alpha & spec.managed_by(j), beta)


def _note_managers(spec: SystemSpec, action: GlobalAction, last_manager: dict) -> dict:
    out = dict(last_manager)
    for a in action.alpha:
        for cid in spec.involved(a):
            out[cid] = spec.manager(a)
    return out


def _project_state(spec: SystemSpec, theta: GlobalAction, new: tuple, last: tuple, j: int) -> tuple:
    scope = spec.scope(j)
    touched = set(theta.beta)
    for a in theta.alpha:
        touched |= spec.involved(a)
    out = []
    for pos, c in enumerate(spec.components):
        if c.id not in scope:
            out.append(UNKNOWN)
        elif c.id in touched:
            out.append(new[pos])
        else:
            out.append(last[pos])
    return tuple(out)


def project_local_trace(spec: SystemSpec, trace: PartialTrace, j: int, mode: str = "scope") -> PartialTrace:
    """Local trace of scheduler ``j``.

    ``mode="scope"`` shows every internal action of a component in scope;
    ``mode="responsible"`` only those of components whose latest interaction
    ``j`` managed, which is what the emitted events can convey.
    """
    if mode not in ("scope", "responsible"):
        raise ValueError(f"unknown projection mode {mode!r}")
    managers: dict | None = {} if mode == "responsible" else None
    local = PartialTrace((trace.states[0],))
    for g, q in zip(trace.actions, trace.states[1:]):
        theta = observed_part(spec, g, j, managers)
        if managers is not None:
            managers = _note_managers(spec, g, managers)
        if not theta:
            continue
        local = local.append(theta, _project_state(spec, theta, q, local.last, j))
    return local


def refine(spec: SystemSpec, trace: PartialTrace) -> PartialTrace:
    """Drop internal actions, folding each post-β state backward over busy slots.

    Actions of the result are frozensets of interaction ids.
    """
    states = [tuple(trace.states[0])]
    actions: list = []
    for g, q in zip(trace.actions, trace.states[1:]):
        alpha = g.alpha if isinstance(g, GlobalAction) else frozenset(g)
        beta = g.beta if isinstance(g, GlobalAction) else frozenset()
        if beta:
            states = [_upd(spec, q, x) for x in states]
        if alpha:
            actions.append(frozenset(alpha))
            states.append(tuple(q))
    return PartialTrace(tuple(states), tuple(actions))


def _upd(spec: SystemSpec, q: tuple, x: tuple) -> tuple:
    out = []
    for pos, (qk, xk) in enumerate(zip(q, x)):
        q_busy = qk != UNKNOWN and spec.is_busy(pos, qk)
        x_busy = xk != UNKNOWN and spec.is_busy(pos, xk)
        out.append(qk if (not q_busy and x_busy) else xk)
    return tuple(out)


def lattice_view(spec: SystemSpec, trace: PartialTrace) -> PartialTrace:
    """Replace busy entries by ``Bot(comp, k)``, k being the manager of the component's latest interaction.

    Works on raw and refined traces; actions become frozensets of interactions.
    """
    last_manager: dict = {}
    states = [_mark(spec, trace.states[0], last_manager)]
    actions = []
    for g, q in zip(trace.actions, trace.states[1:]):
        alpha = g.alpha if isinstance(g, GlobalAction) else frozenset(g)
        for a in alpha:
            for cid in spec.involved(a):
                last_manager[cid] = spec.manager(a)
        states.append(_mark(spec, q, last_manager))
        actions.append(g if isinstance(g, GlobalAction) else frozenset(g))
    return PartialTrace(tuple(states), tuple(actions))


def _mark(spec, q, last_manager):
    out = []
    for pos, (c, s) in enumerate(zip(spec.components, q)):
        if s != UNKNOWN and not isinstance(s, Bot) and c.is_busy(s):
            out.append(Bot(c.id, last_manager.get(c.id, 0)))
        else:
            out.append(s)
    return tuple(out)


def compatible_traces(spec: SystemSpec, trace: PartialTrace, bound: int = 12, mode: str = "scope") -> list:
    """All traces with the same per-scheduler projections as ``trace``, one per refined shape.

    Traces that differ only in where internal actions sit are collapsed; the
    representative kept is the first met in canonical search order. ``mode``
    selects the projection, see ``project_local_trace``.
    """
    if len(trace) > bound:
        raise BudgetExceeded(f"trace has {len(trace)} global actions, bound is {bound}")
    locals_ = [project_local_trace(spec, trace, j, mode) for j in range(1, spec.m + 1)]
    start = spec.initial_state()
    if start.components != tuple(trace.states[0]):
        raise ValueError("trace does not start in the initial state")
    found: dict = {}

    # Breadth first; partial runs that agree on state, progress in every
    # local trace and refined prefix have the same completions, so only the
    # first of them is kept.
    start_key = (start, (0,) * spec.m, () if mode == "responsible" else None, ((start.components,), ()))
    level = {start_key: PartialTrace((start.components,))}
    while level:
        nxt_level: dict = {}
        for (g_state, ptrs, managers, (r_states, r_actions)), acc in level.items():
            if all(p == len(loc) for p, loc in zip(ptrs, locals_)):
                found.setdefault(PartialTrace(r_states, r_actions), acc)
                continue
            last_manager = dict(managers) if managers is not None else None
            for g in sorted_actions(enabled_global_actions(spec, g_state)):
                nxt = step(spec, g_state, g)
                new_ptrs = list(ptrs)
                for j, loc in enumerate(locals_, start=1):
                    theta = observed_part(spec, g, j, last_manager)
                    if not theta:
                        continue
                    p = ptrs[j - 1]
                    if p >= len(loc) or loc.actions[p] != theta:
                        break
                    if _project_state(spec, theta, nxt.components, loc.states[p], j) != loc.states[p + 1]:
                        break
                    new_ptrs[j - 1] = p + 1
                else:
                    nm = None
                    if last_manager is not None:
                        nm = tuple(sorted(_note_managers(spec, g, last_manager).items()))
                    q = nxt.components
                    st = tuple(_upd(spec, q, x) for x in r_states) if g.beta else r_states
                    ac = r_actions
                    if g.alpha:
                        st, ac = st + (q,), ac + (frozenset(g.alpha),)
                    key = (nxt, tuple(new_ptrs), nm, (st, ac))
                    if key not in nxt_level:
                        nxt_level[key] = acc.append(g, q)
        level = nxt_level
    return [found[k] for k in sorted(found, key=lambda t: repr(t))]
