"""Online construction of the computation lattice from observer events.

Nodes are keyed by vector clock. A node holds a partial global state, where
busy components appear as ``Bot(comp, k)``, plus a bag (multiset) of
progressed formulas, one entry per path reaching it.

Events arrive in per-scheduler order but arbitrarily interleaved across
schedulers. An action event that cannot extend any node yet waits in the
queue. An update event waits while an action of the same scheduler on the
same component sits ahead of it in the queue. With ``update_wait="any"`` it
waits while any queued action involves that component instead, which makes
the result depend on the delivery order.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

from .errors import BudgetExceeded, LengthMismatch, MeetMissing, ProtocolViolation
from .instrumentation import ActionEvent, UpdateEvent, vc_max
from .ltl import FALSE, TRUE, Formula, fold, progress, update_formula
from .model import Bot, SystemSpec


@dataclass
class LatticeNode:
    clock: tuple
    state: tuple
    formulas: Counter = field(default_factory=Counter)


def extend_node(node: LatticeNode, e: ActionEvent, spec: SystemSpec) -> LatticeNode | None:
    j = e.sender
    if len(e.clock) != len(node.clock):
        return None
    for k, (a, b) in enumerate(zip(node.clock, e.clock), start=1):
        if b != (a + 1 if k == j else a):
            return None
    state = list(node.state)
    for cid in spec.involved(e.interaction):
        state[spec.component_index(cid)] = Bot(cid, j)
    return LatticeNode(e.clock, tuple(state))


def update_node(node: LatticeNode, e: UpdateEvent, spec: SystemSpec) -> LatticeNode:
    pos = spec.component_index(e.component)
    if node.state[pos] != Bot(e.component, e.sender):
        return LatticeNode(node.clock, node.state, node.formulas)
    state = node.state[:pos] + (e.state,) + node.state[pos + 1 :]
    return LatticeNode(node.clock, state, node.formulas)


def j_related(a: tuple, b: tuple) -> bool:
    if len(a) != len(b):
        raise LengthMismatch(f"clock lengths differ: {len(a)} vs {len(b)}")
    diffs = [x - y for x, y in zip(a, b)]
    return sorted(d for d in diffs if d) == [-1, 1]


def _joint_state(n: LatticeNode, n2: LatticeNode, meet: LatticeNode) -> tuple:
    return tuple(x if x != m else y for x, y, m in zip(n.state, n2.state, meet.state))


class Lattice:
    """Computation lattice plus its event queue.

    ``prop`` (optional) turns on formula bags. ``prune`` drops nodes that are
    strictly dominated in every clock coordinate.
    """

    def __init__(
        self,
        spec: SystemSpec,
        prop: Formula | None = None,
        prune: bool = True,
        prune_mode: str = "single",
        update_wait: str = "sender",
    ):
        if prune_mode not in ("single", "per-coordinate"):
            raise ValueError(f"unknown prune mode {prune_mode!r}")
        if update_wait not in ("sender", "any"):
            raise ValueError(f"unknown update wait rule {update_wait!r}")
        self.update_wait = update_wait
        self.spec = spec
        self.prop = None if prop is None else fold(prop)
        self.prune = prune
        self.prune_mode = prune_mode
        zero = (0,) * spec.m
        init = LatticeNode(zero, spec.initial_state().components)
        if prop is not None:
            init.formulas[self.prop] = 1
        self.nodes: dict = {zero: init}
        # path counts over every node ever created, pruned or not
        self.total_paths: dict = {zero: 1}
        self.queue: list = []
        self.labels: dict = {}
        self.created = 1
        self.removed = 0
        self.observed = 0

    # -- queries --------------------------------------------------------------

    @property
    def frontier(self) -> LatticeNode:
        top = tuple(max(c[k] for c in self.nodes) for k in range(self.spec.m))
        return self.nodes[top]

    def edges(self) -> list:
        """Single-step edges ``(clock, {interaction}, clock')`` between live nodes."""
        out = []
        for c in sorted(self.nodes):
            for k in range(self.spec.m):
                prev = c[:k] + (c[k] - 1,) + c[k + 1 :]
                if prev in self.nodes:
                    out.append((prev, frozenset([self.labels[(k + 1, c[k])]]), c))
        return out

    def meet_of(self, a: tuple, b: tuple) -> LatticeNode:
        low = tuple(min(x, y) for x, y in zip(a, b))
        if low not in self.nodes:
            raise MeetMissing(f"no node at {low} for {a} and {b}")
        return self.nodes[low]

    def joint_of(self, a: tuple, b: tuple) -> LatticeNode:
        meet = self.meet_of(a, b)
        n, n2 = self.nodes[a], self.nodes[b]
        return LatticeNode(vc_max(a, b), _joint_state(n, n2, meet))

    def predecessor_steps(self, clock: tuple, pool=None) -> list:
        """``(axes, source clock)`` for each step ending at ``clock`` in the current lattice.

        A step over several axes is a meet-to-joint move: every single-axis
        intermediate node must be present. ``pool`` replaces the live node set.
        """
        pool = self.nodes if pool is None else pool
        out = []
        axes = [k for k in range(len(clock)) if clock[k] > 0]
        for r in range(1, len(axes) + 1):
            for subset in itertools.combinations(axes, r):
                src = tuple(c - (1 if k in subset else 0) for k, c in enumerate(clock))
                if src not in pool:
                    continue
                if r > 1 and not all(
                    tuple(s + (1 if i == k else 0) for i, s in enumerate(src)) in pool for k in subset
                ):
                    continue
                out.append((subset, src))
        return out

    def step_label(self, clock: tuple, axes) -> frozenset:
        return frozenset(self.labels[(k + 1, clock[k])] for k in axes)

    # -- construction ---------------------------------------------------------

    def _check_event(self, e):
        spec = self.spec
        if not 1 <= e.sender <= spec.m:
            raise ProtocolViolation(f"unknown sender {e.sender}")
        if isinstance(e, ActionEvent):
            if e.interaction not in spec.interactions:
                raise ProtocolViolation(f"unknown interaction {e.interaction}")
            if spec.manager(e.interaction) != e.sender:
                raise ProtocolViolation(f"{e.interaction} is not managed by scheduler {e.sender}")
            if len(e.clock) != spec.m:
                raise ProtocolViolation(f"clock {e.clock} has the wrong length")
        else:
            try:
                comp = spec.component(e.component)
            except KeyError:
                raise ProtocolViolation(f"unknown component {e.component}") from None
            if e.state not in comp.ready_states:
                raise ProtocolViolation(f"{e.state} is not a ready state of {e.component}")

    def make(self, e, from_queue: bool = False) -> bool:
        """Process one event; returns whether it was consumed."""
        if not from_queue:
            self._check_event(e)
            self.observed += 1
        if isinstance(e, ActionEvent):
            return self._action_event(e, from_queue)
        return self._update_event(e, from_queue)

    def feed(self, events) -> "Lattice":
        for e in events:
            self.make(e)
        return self

    def _modify_queue(self, e, from_queue: bool, used: bool):
        if from_queue and used:
            self.queue.remove(e)
        elif not from_queue and not used:
            self.queue.append(e)

    def _action_event(self, e: ActionEvent, from_queue: bool) -> bool:
        if e.clock in self.nodes:
            raise ProtocolViolation(f"a node with clock {e.clock} already exists")
        base = [n for n in self.nodes.values() if extend_node(n, e, self.spec) is not None]
        if len(base) > 1:
            raise ProtocolViolation(f"{len(base)} nodes extendable by {e}")
        if not base:
            self._modify_queue(e, from_queue, used=False)
            return False
        self.labels[(e.sender, e.clock[e.sender - 1])] = e.interaction
        self._add(extend_node(base[0], e, self.spec))
        self._modify_queue(e, from_queue, used=True)
        self._joints()
        if self.prune:
            self._remove_extra_nodes()
        if not from_queue:
            self._check_queue()
        return True

    def _update_event(self, e: UpdateEvent, from_queue: bool) -> bool:
        ahead = self.queue
        if self.update_wait == "sender" and from_queue:
            ahead = self.queue[: self.queue.index(e)]
        for other in ahead:
            if not isinstance(other, ActionEvent) or e.component not in self.spec.involved(other.interaction):
                continue
            if self.update_wait == "any" or other.sender == e.sender:
                self._modify_queue(e, from_queue, used=False)
                return False
        for clock, node in list(self.nodes.items()):
            fresh = update_node(node, e, self.spec)
            if self.prop is not None:
                bag: Counter = Counter()
                for f, mult in node.formulas.items():
                    bag[update_formula(f, e.component, e.state, e.sender, self.spec)] += mult
                fresh.formulas = bag
            self.nodes[clock] = fresh
        self._modify_queue(e, from_queue, used=True)
        return True

    def _add(self, node: LatticeNode):
        if node.clock in self.nodes:
            raise ProtocolViolation(f"a node with clock {node.clock} already exists")
        self.nodes[node.clock] = node
        self.created += 1
        self.total_paths[node.clock] = sum(
            self.total_paths[src] for _, src in self.predecessor_steps(node.clock, self.total_paths)
        )
        if self.prop is not None:
            bag: Counter = Counter()
            for _, src in self.predecessor_steps(node.clock):
                for f, mult in self.nodes[src].formulas.items():
                    bag[progress(f, node.state, self.spec)] += mult
            node.formulas = bag

    def _jcompute(self) -> list:
        """Pairs of J-related live nodes whose joint is missing."""
        out = []
        m = self.spec.m
        for c in sorted(self.nodes):
            for up in range(m):
                for down in range(m):
                    if up == down or c[down] == 0:
                        continue
                    other = tuple(
                        x + (1 if i == up else 0) - (1 if i == down else 0) for i, x in enumerate(c)
                    )
                    if other > c or other not in self.nodes:
                        continue
                    joint = vc_max(c, other)
                    if joint not in self.nodes:
                        out.append((c, other))
        return out

    def _joints(self):
        while True:
            pairs = self._jcompute()
            if not pairs:
                return
            for a, b in pairs:
                top = vc_max(a, b)
                if top in self.nodes:
                    existing = self.nodes[top]
                    if existing.state != self.joint_of(a, b).state:
                        raise ProtocolViolation(f"joint at {top} reached with two different states")
                    continue
                self._add(self.joint_of(a, b))

    def _dominated(self, c: tuple) -> bool:
        if self.prune_mode == "single":
            return any(all(x > y for x, y in zip(o, c)) for o in self.nodes)
        return all(any(o[k] > c[k] for o in self.nodes) for k in range(len(c)))

    def _remove_extra_nodes(self):
        doomed = [c for c in self.nodes if self._dominated(c)]
        for c in doomed:
            del self.nodes[c]
        self.removed += len(doomed)

    def _check_queue(self):
        while True:
            before = list(self.queue)
            for e in before:
                if e in self.queue:
                    self.make(e, from_queue=True)
            if self.queue == before:
                return

    # -- paths and reporting --------------------------------------------------

    def sources(self) -> list:
        return [c for c in sorted(self.nodes) if not self.predecessor_steps(c)]

    def count_paths(self) -> int:
        counts: dict = {}
        for c in sorted(self.nodes, key=sum):
            steps = self.predecessor_steps(c)
            counts[c] = 1 if not steps else sum(counts[src] for _, src in steps)
        return counts[self.frontier.clock]

    def paths(self, limit: int = 10**6) -> list:
        """Every path from a source node to the frontier as ``(states, labels)``."""
        total = self.count_paths()
        if total > limit:
            raise BudgetExceeded(f"{total} paths exceed the limit of {limit}")
        memo: dict = {}

        def ending_at(c):
            if c in memo:
                return memo[c]
            steps = self.predecessor_steps(c)
            node = self.nodes[c]
            if not steps:
                result = [((node.state,), ())]
            else:
                result = []
                for axes, src in steps:
                    label = self.step_label(c, axes)
                    for states, labels in ending_at(src):
                        result.append((states + (node.state,), labels + (label,)))
            memo[c] = result
            return result

        return sorted(ending_at(self.frontier.clock), key=repr)

    def report(self, with_paths: bool = True) -> dict:
        bag = self.frontier.formulas
        return {
            "observed_events": self.observed,
            "live_nodes": len(self.nodes),
            "removed_nodes": self.removed,
            "created_nodes": self.created,
            "frontier_clock": self.frontier.clock,
            "path_count": self.total_paths[self.frontier.clock],
            "live_path_count": self.count_paths() if with_paths else None,
            "frontier_formulas": Counter(bag),
            "formulas_false": bag.get(FALSE, 0),
            "formulas_true": bag.get(TRUE, 0),
            "formulas_open": sum(v for f, v in bag.items() if f not in (TRUE, FALSE)),
            "pending_events": len(self.queue),
        }


def lattice_report(lattice: Lattice) -> dict:
    return lattice.report()
