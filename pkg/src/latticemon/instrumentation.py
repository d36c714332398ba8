"""Vector-clock controllers attached to schedulers and shared components.

The controllers do not change what the system does; they only emit events
for the observer. A scheduler controller holds its clock and the set of
busy components whose latest action it ran. A shared component carries
the clock of the last scheduler that used it, so the next scheduler to see
it finish can pull that knowledge in.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .errors import LengthMismatch, NotEnabled, ParseError
from .model import GlobalAction, GlobalState, PartialTrace, SystemSpec, sorted_actions, enabled_global_actions, step


def _check_len(a, b):
    if len(a) != len(b):
        raise LengthMismatch(f"clock lengths differ: {len(a)} vs {len(b)}")


def vc_max(a: tuple, b: tuple) -> tuple:
    _check_len(a, b)
    return tuple(max(x, y) for x, y in zip(a, b))


def vc_less(a: tuple, b: tuple) -> bool:
    """Strict happened-before order: ``a <= b`` everywhere and ``a != b``."""
    _check_len(a, b)
    return all(x <= y for x, y in zip(a, b)) and a != b


def vc_inc(a: tuple, j: int) -> tuple:
    """Increment the 1-based coordinate ``j``."""
    if not 1 <= j <= len(a):
        raise LengthMismatch(f"index {j} outside a clock of length {len(a)}")
    return a[: j - 1] + (a[j - 1] + 1,) + a[j:]


@dataclass(frozen=True)
class ActionEvent:
    interaction: str
    clock: tuple
    sender: int

    def to_line(self) -> str:
        return f"A {self.sender} {self.interaction} {','.join(map(str, self.clock))}"

    def __str__(self) -> str:
        return f"({self.interaction},({','.join(map(str, self.clock))}))"


@dataclass(frozen=True)
class UpdateEvent:
    component: str
    state: str
    sender: int

    def to_line(self) -> str:
        return f"U {self.sender} {self.component} {self.state}"

    def __str__(self) -> str:
        return f"β[{self.component}]={self.state}@S{self.sender}"


def parse_event_line(line: str, lineno: int | None = None):
    parts = line.split()
    if len(parts) != 4 or parts[0] not in ("A", "U"):
        raise ParseError(f"malformed event {line.strip()!r}", lineno)
    try:
        sender = int(parts[1])
    except ValueError:
        raise ParseError(f"bad sender {parts[1]!r}", lineno) from None
    if sender < 1:
        raise ParseError(f"bad sender {parts[1]!r}", lineno)
    if parts[0] == "U":
        return UpdateEvent(parts[2], parts[3], sender)
    try:
        clock = tuple(int(x) for x in parts[3].split(","))
    except ValueError:
        raise ParseError(f"bad clock {parts[3]!r}", lineno) from None
    if any(c < 0 for c in clock):
        raise ParseError(f"bad clock {parts[3]!r}", lineno)
    return ActionEvent(parts[2], clock, sender)


def parse_event_log(text: str) -> list:
    events = []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        events.append(parse_event_line(line, n))
    return events


def format_event_log(events) -> str:
    return "".join(e.to_line() + "\n" for e in events)


@dataclass(frozen=True)
class SchedulerControllerState:
    busy: frozenset
    clock: tuple


@dataclass(frozen=True)
class InstrumentedState:
    base: GlobalState
    controllers: tuple
    shared: tuple  # (component id, clock) pairs, sorted by id

    def shared_clock(self, cid: str) -> tuple:
        return dict(self.shared)[cid]


def initial_instrumented(spec: SystemSpec) -> InstrumentedState:
    zero = (0,) * spec.m
    return InstrumentedState(
        spec.initial_state(),
        tuple(SchedulerControllerState(frozenset(), zero) for _ in range(spec.m)),
        tuple((cid, zero) for cid in sorted(spec.shared)),
    )


@dataclass(frozen=True)
class Mutation:
    """Deliberate controller faults, used to check that the preservation test has teeth."""

    drop_busy_updates: bool = False


def instrumented_step(spec: SystemSpec, istate: InstrumentedState, action: GlobalAction, mutation: Mutation | None = None):
    """Run one global action through the instrumented system.

    Returns ``(new_state, events)``. Raises ``NotEnabled`` when the base
    system refuses the action or when a scheduler is told about an internal
    action that none of its controller rules accepts.
    """
    base = step(spec, istate.base, action)
    ctrls = list(istate.controllers)
    shared = dict(istate.shared)
    events = []
    for a in sorted(action.alpha):
        j = spec.manager(a)
        c = ctrls[j - 1]
        clock = vc_inc(c.clock, j)
        busy = c.busy if mutation and mutation.drop_busy_updates else c.busy | spec.involved(a)
        ctrls[j - 1] = SchedulerControllerState(busy, clock)
        events.append(ActionEvent(a, clock, j))
        for cid in spec.involved(a):
            if cid in shared:
                shared[cid] = vc_max(shared[cid], clock)
    for cid in sorted(action.beta):
        pos = spec.component_index(cid)
        for j in spec.observers(cid):
            c = ctrls[j - 1]
            if cid in c.busy:
                ctrls[j - 1] = replace(c, busy=c.busy - {cid})
                events.append(UpdateEvent(cid, base.components[pos], j))
            elif cid in shared:
                ctrls[j - 1] = replace(c, clock=vc_max(c.clock, shared[cid]))
            else:
                raise NotEnabled(f"controller of scheduler {j} has no rule for the internal action of {cid}")
    new = InstrumentedState(base, tuple(ctrls), tuple(sorted(shared.items())))
    return new, events


def run_instrumented(spec: SystemSpec, actions, mutation: Mutation | None = None):
    """Replay global actions; returns (trace, events, final instrumented state)."""
    ist = initial_instrumented(spec)
    trace = PartialTrace((ist.base.components,))
    log = []
    for g in actions:
        ist, evs = instrumented_step(spec, ist, g, mutation)
        log.extend(evs)
        trace = trace.append(g, ist.base.components)
    return trace, log, ist


def extract_events(spec: SystemSpec, trace: PartialTrace, j: int) -> list:
    """Events scheduler ``j`` sends to the observer while ``trace`` runs."""
    _, log, _ = run_instrumented(spec, trace.actions)
    return [e for e in log if e.sender == j]


def random_schedule(spec: SystemSpec, seed: int, length: int) -> list:
    rng = random.Random(seed)
    g_state = spec.initial_state()
    out = []
    for _ in range(length):
        options = sorted_actions(enabled_global_actions(spec, g_state))
        if not options:
            break
        g = rng.choice(options)
        out.append(g)
        g_state = step(spec, g_state, g)
    return out


def check_trace_preservation(spec: SystemSpec, seed: int, length: int, mutation: Mutation | None = None) -> bool:
    """Compare the plain run of a seeded schedule with its instrumented run."""
    schedule = random_schedule(spec, seed, length)
    plain = [spec.initial_state().components]
    g_state = spec.initial_state()
    for g in schedule:
        g_state = step(spec, g_state, g)
        plain.append(g_state.components)
    observed = [spec.initial_state().components]
    ist = initial_instrumented(spec)
    for g in schedule:
        try:
            ist, _ = instrumented_step(spec, ist, g, mutation)
        except NotEnabled:
            break
        observed.append(ist.base.components)
    return observed == plain
