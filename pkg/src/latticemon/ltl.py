"""LTL formulas, progression over partial states, and deferred atoms.

Progression rewrites a formula against one observed state into what must
still hold afterwards. When the component owning an atom is busy, the atom
cannot be decided yet and becomes ``XBeta(k, p)``: p must hold at the next
ready state of that component, as reported by scheduler k. An update event
later resolves it.

All rewriting goes through the folding constructors ``mk_not``, ``mk_and``
and ``mk_or``, so results are always constant-folded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from functools import lru_cache

from .errors import ParseError, PartialState
from .model import UNKNOWN, Bot, GlobalAction, PartialTrace, SystemSpec, lattice_view


class Formula:
    __slots__ = ()

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)

    def __str__(self):
        return show(self)


@dataclass(frozen=True, repr=False)
class Const(Formula):
    value: bool

    def __repr__(self):
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True, repr=False)
class Atom(Formula):
    comp: str
    prop: str

    def __repr__(self):
        return f"Atom({self.comp}.{self.prop})"


@dataclass(frozen=True, repr=False)
class XBeta(Formula):
    k: int
    atom: Atom

    def __repr__(self):
        return f"XBeta({self.k},{self.atom.comp}.{self.atom.prop})"


@dataclass(frozen=True, repr=False)
class Not(Formula):
    arg: Formula

    def __repr__(self):
        return f"Not({self.arg!r})"


@dataclass(frozen=True, repr=False)
class And(Formula):
    left: Formula
    right: Formula

    def __repr__(self):
        return f"And({self.left!r},{self.right!r})"


@dataclass(frozen=True, repr=False)
class Or(Formula):
    left: Formula
    right: Formula

    def __repr__(self):
        return f"Or({self.left!r},{self.right!r})"


@dataclass(frozen=True, repr=False)
class Next(Formula):
    arg: Formula

    def __repr__(self):
        return f"X({self.arg!r})"


@dataclass(frozen=True, repr=False)
class Until(Formula):
    left: Formula
    right: Formula

    def __repr__(self):
        return f"U({self.left!r},{self.right!r})"


@dataclass(frozen=True, repr=False)
class Always(Formula):
    arg: Formula

    def __repr__(self):
        return f"G({self.arg!r})"


@dataclass(frozen=True, repr=False)
class Eventually(Formula):
    arg: Formula

    def __repr__(self):
        return f"F({self.arg!r})"


# Formulas are compared and hashed a lot while bags are rebuilt; cache the
# hash on each node and let unequal hashes short-circuit equality.


def _cached_hash(self):
    h = self.__dict__.get("_hash")
    if h is None:
        h = hash((type(self).__name__,) + tuple(getattr(self, f.name) for f in fields(self)))
        object.__setattr__(self, "_hash", h)
    return h


def _fast_eq(self, other):
    if self is other:
        return True
    if type(other) is not type(self):
        return NotImplemented
    if hash(self) != hash(other):
        return False
    return all(getattr(self, f.name) == getattr(other, f.name) for f in fields(self))


for _cls in (Const, Atom, XBeta, Not, And, Or, Next, Until, Always, Eventually):
    _cls.__hash__ = _cached_hash
    _cls.__eq__ = _fast_eq


def implies(a: Formula, b: Formula) -> Formula:
    return Or(Not(a), b)


# -- folding constructors -----------------------------------------------------


def mk_not(a: Formula) -> Formula:
    if a == TRUE:
        return FALSE
    if a == FALSE:
        return TRUE
    return Not(a)


def mk_and(a: Formula, b: Formula) -> Formula:
    if a == FALSE or b == FALSE:
        return FALSE
    if a == TRUE:
        return b
    if b == TRUE:
        return a
    return And(a, b)


def mk_or(a: Formula, b: Formula) -> Formula:
    if a == TRUE or b == TRUE:
        return TRUE
    if a == FALSE:
        return b
    if b == FALSE:
        return a
    return Or(a, b)


def fold(f: Formula) -> Formula:
    """Bottom-up constant folding."""
    if isinstance(f, Not):
        return mk_not(fold(f.arg))
    if isinstance(f, And):
        return mk_and(fold(f.left), fold(f.right))
    if isinstance(f, Or):
        return mk_or(fold(f.left), fold(f.right))
    if isinstance(f, Next):
        return Next(fold(f.arg))
    if isinstance(f, Until):
        return Until(fold(f.left), fold(f.right))
    if isinstance(f, Always):
        return Always(fold(f.arg))
    if isinstance(f, Eventually):
        return Eventually(fold(f.arg))
    return f


def atoms(f: Formula) -> set:
    if isinstance(f, Atom):
        return {f}
    if isinstance(f, XBeta):
        return {f.atom}
    out: set = set()
    for child in children(f):
        out |= atoms(child)
    return out


def children(f: Formula) -> tuple:
    if isinstance(f, (Not, Next, Always, Eventually)):
        return (f.arg,)
    if isinstance(f, (And, Or, Until)):
        return (f.left, f.right)
    return ()


def conjuncts(f: Formula) -> list:
    """Flatten nested conjunctions into a list of conjuncts."""
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]


# -- progression --------------------------------------------------------------


def _atom_value(spec: SystemSpec, atom: Atom, q: tuple, strict: bool) -> Formula:
    pos = spec.component_index(atom.comp)
    s = q[pos]
    if isinstance(s, Bot):
        if strict:
            raise PartialState(f"{atom.comp} is busy")
        return XBeta(s.k, atom)
    if s == UNKNOWN or spec.is_busy(pos, s):
        raise PartialState(f"{atom.comp} has no ready state in {q}")
    return TRUE if spec.components[pos].holds(s, atom.prop) else FALSE


@lru_cache(maxsize=1 << 16)
def progress(f: Formula, q: tuple, spec: SystemSpec, strict: bool = False) -> Formula:
    """Progress ``f`` through the lattice state ``q`` (ready states and ``Bot`` markers)."""
    if isinstance(f, Const) or isinstance(f, XBeta):
        return f
    if isinstance(f, Atom):
        return _atom_value(spec, f, q, strict)
    if isinstance(f, Not):
        return mk_not(progress(f.arg, q, spec, strict))
    if isinstance(f, And):
        return mk_and(progress(f.left, q, spec, strict), progress(f.right, q, spec, strict))
    if isinstance(f, Or):
        return mk_or(progress(f.left, q, spec, strict), progress(f.right, q, spec, strict))
    if isinstance(f, Next):
        return fold(f.arg)
    if isinstance(f, Until):
        return mk_or(
            progress(f.right, q, spec, strict),
            mk_and(progress(f.left, q, spec, strict), f),
        )
    if isinstance(f, Always):
        return mk_and(progress(f.arg, q, spec, strict), f)
    if isinstance(f, Eventually):
        return mk_or(progress(f.arg, q, spec, strict), f)
    raise TypeError(f"not a formula: {f!r}")


@lru_cache(maxsize=1 << 16)
def update_formula(f: Formula, comp: str, state: str, j: int | None, spec: SystemSpec) -> Formula:
    """Resolve ``XBeta(j, p)`` for atoms of ``comp`` now that it reached ready ``state``.

    ``j=None`` resolves deferred atoms of ``comp`` whatever their scheduler index.
    """
    if isinstance(f, XBeta):
        if f.atom.comp == comp and (j is None or f.k == j):
            return TRUE if spec.component(comp).holds(state, f.atom.prop) else FALSE
        return f
    if isinstance(f, (Const, Atom)):
        return f
    if isinstance(f, Not):
        return mk_not(update_formula(f.arg, comp, state, j, spec))
    if isinstance(f, And):
        return mk_and(update_formula(f.left, comp, state, j, spec), update_formula(f.right, comp, state, j, spec))
    if isinstance(f, Or):
        return mk_or(update_formula(f.left, comp, state, j, spec), update_formula(f.right, comp, state, j, spec))
    if isinstance(f, Next):
        return Next(update_formula(f.arg, comp, state, j, spec))
    if isinstance(f, Until):
        return Until(update_formula(f.left, comp, state, j, spec), update_formula(f.right, comp, state, j, spec))
    if isinstance(f, Always):
        return Always(update_formula(f.arg, comp, state, j, spec))
    if isinstance(f, Eventually):
        return Eventually(update_formula(f.arg, comp, state, j, spec))
    raise TypeError(f"not a formula: {f!r}")


def prog_oracle(f: Formula, trace: PartialTrace, spec: SystemSpec) -> Formula:
    """Reference progression along a global partial trace.

    For each step, deferred atoms of components that just finished are
    resolved first; the formula is then progressed through the reached state
    if the step contains at least one interaction.
    """
    view = lattice_view(spec, trace)
    for g, raw, q in zip(trace.actions, trace.states[1:], view.states[1:]):
        beta = g.beta if isinstance(g, GlobalAction) else frozenset()
        alpha = g.alpha if isinstance(g, GlobalAction) else frozenset(g)
        for cid in sorted(beta):
            f = update_formula(f, cid, raw[spec.component_index(cid)], None, spec)
        if alpha:
            f = progress(f, q, spec)
    return f


def standard_progression(f: Formula, trace: PartialTrace, spec: SystemSpec, include_initial: bool = False) -> Formula:
    """Classic progression over a trace of fully ready states.

    By default the first state is not consumed, matching the lattice, whose
    initial node carries the unprogressed property.
    """
    states = trace.states if include_initial else trace.states[1:]
    for q in states:
        f = progress(f, q, spec, strict=True)
    return f


# -- text ---------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(->|[()!&|]|[A-Za-z_][\w]*(?:\.[\w]+)?)")
_KEYWORDS = {"G", "F", "X", "U", "true", "false"}


def parse_formula(text: str, bindings: dict | None = None) -> Formula:
    """Parse ``G F X U ! & | -> true false``, atoms written ``component.prop``.

    Bare identifiers are looked up in ``bindings`` (name -> (component, prop)).
    Precedence, tightest first: prefix operators, ``U`` (right-assoc), ``&``,
    ``|``, ``->`` (right-assoc).
    """
    bindings = bindings or {}
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r} in formula")
        tokens.append(m.group(1))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    tokens.append(None)
    i = 0

    def peek():
        return tokens[i]

    def take(expected=None):
        nonlocal i
        tok = tokens[i]
        if expected is not None and tok != expected:
            raise ParseError(f"expected {expected!r}, got {tok!r}")
        i += 1
        return tok

    def p_impl():
        left = p_or()
        if peek() == "->":
            take()
            return implies(left, p_impl())
        return left

    def p_or():
        left = p_and()
        while peek() == "|":
            take()
            left = Or(left, p_and())
        return left

    def p_and():
        left = p_until()
        while peek() == "&":
            take()
            left = And(left, p_until())
        return left

    def p_until():
        left = p_unary()
        if peek() == "U":
            take()
            return Until(left, p_until())
        return left

    def p_unary():
        tok = peek()
        if tok == "!":
            take()
            return Not(p_unary())
        if tok in ("X", "G", "F"):
            take()
            arg = p_unary()
            return {"X": Next, "G": Always, "F": Eventually}[tok](arg)
        return p_primary()

    def p_primary():
        tok = take()
        if tok is None:
            raise ParseError("unexpected end of formula")
        if tok == "(":
            inner = p_impl()
            take(")")
            return inner
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        if tok in _KEYWORDS or tok in (")", "&", "|", "->"):
            raise ParseError(f"unexpected {tok!r}")
        if "." in tok:
            comp, prop = tok.split(".", 1)
            return Atom(comp, prop)
        if tok in bindings:
            comp, prop = bindings[tok]
            return Atom(comp, prop)
        raise ParseError(f"unknown atom {tok!r}")

    result = p_impl()
    if peek() is not None:
        raise ParseError(f"trailing input at {peek()!r}")
    return result


_PREC = {Or: 1, And: 2, Until: 3}


def show(f: Formula, names: dict | None = None, qualify: bool = False) -> str:
    """Readable rendering; ``names`` maps whole formulas to short labels."""
    names = names or {}

    def atom_text(a: Atom) -> str:
        return f"{a.comp}.{a.prop}" if qualify else a.prop

    def go(g, parent):
        if g in names:
            return names[g]
        if isinstance(g, Const):
            return "T" if g.value else "F"
        if isinstance(g, Atom):
            return atom_text(g)
        if isinstance(g, XBeta):
            return f"Xβ{g.k}({atom_text(g.atom)})"
        if isinstance(g, Not):
            return "!" + go(g.arg, 9)
        if isinstance(g, (Next, Always, Eventually)):
            op = {Next: "X", Always: "G", Eventually: "F"}[type(g)]
            return op + go(g.arg, 9)
        prec = _PREC[type(g)]
        op = {Or: " | ", And: " & ", Until: " U "}[type(g)]
        text = go(g.left, prec) + op + go(g.right, prec)
        return f"({text})" if prec <= parent else text

    return go(f, 0)


def to_text(f: Formula) -> str:
    """Round-trippable text for ``parse_formula``."""
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return f"{f.comp}.{f.prop}"
    if isinstance(f, XBeta):
        raise ValueError("deferred atoms have no surface syntax")
    if isinstance(f, Not):
        return f"!({to_text(f.arg)})"
    if isinstance(f, Next):
        return f"X({to_text(f.arg)})"
    if isinstance(f, Always):
        return f"G({to_text(f.arg)})"
    if isinstance(f, Eventually):
        return f"F({to_text(f.arg)})"
    op = {And: "&", Or: "|", Until: "U"}[type(f)]
    return f"({to_text(f.left)}) {op} ({to_text(f.right)})"


def verdict(f: Formula) -> str:
    if f == TRUE:
        return "true"
    if f == FALSE:
        return "false"
    return "open"
