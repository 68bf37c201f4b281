"""Brute-force reference used to check the planner and the evaluator.

Everything here is recomputed from the rules on concrete representative values
(the upper bound of each numeric cell) without going through ``evaluator`` or
``planner``: truth of literals, the goal set, action effects and the
transition relation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .abstraction import AbstractDomain, Cell, State, enumerate_states, value_label
from .rules import (
    Defined,
    FeatureEq,
    FeatureGt,
    FeatureLeq,
    Mutability,
    NumericHead,
    Rule,
    RuleKind,
    StratifiedProgram,
)


def _concrete(v):
    return v.hi if isinstance(v, Cell) else v


class _Ground:
    """Straightforward top-down evaluation of one concrete record."""

    def __init__(self, prog: StratifiedProgram, record: dict):
        self.prog = prog
        self.rec = record
        self.memo: dict = {}

    def feature_test(self, atom) -> bool:
        x = self.rec[atom.feature]
        if isinstance(atom, FeatureEq):
            return x == atom.value
        if isinstance(atom, FeatureLeq):
            return Fraction(x) <= atom.threshold
        return Fraction(x) > atom.threshold

    def literal(self, lit) -> bool:
        a = lit.atom
        val = self.atom(a.predicate, a.value) if isinstance(a, Defined) else self.feature_test(a)
        return not val if lit.negated else val

    def body(self, rule: Rule) -> bool:
        for lit in rule.body:
            if not self.literal(lit):
                return False
        return True

    def atom(self, pred: str, value) -> bool:
        key = (pred, value)
        if key in self.memo:
            return self.memo[key]
        self.memo[key] = False  # positive loops resolve to false
        result = False
        for r in self.prog.rules:
            if r.head == pred and r.value == value and self.body(r):
                result = True
                break
        self.memo[key] = result
        return result


def _in_head(x, head) -> bool:
    if isinstance(head, NumericHead):
        x = Fraction(x)
        return (head.lo is None or x > head.lo) and (head.hi is None or x <= head.hi)
    return x == head


class Oracle:
    def __init__(self, prog: StratifiedProgram, dom: AbstractDomain):
        self.prog = prog
        self.dom = dom
        self.names = list(prog.schema.names)
        self._consistent: dict = {}
        self._undesired: dict = {}
        self._closure: dict = {}
        self.actions = self._actions()

    def _record(self, s: State) -> dict:
        return {n: _concrete(v) for n, v in zip(self.names, s)}

    def in_sc(self, s: State) -> bool:
        if s not in self._consistent:
            g = _Ground(self.prog, self._record(s))
            ok = True
            for r in self.prog.rules:
                if r.kind is not RuleKind.CAUSAL:
                    continue
                inside = _in_head(g.rec[r.head], r.value)
                if inside != g.atom(r.head, r.value):
                    ok = False
                    break
            self._consistent[s] = ok
        return self._consistent[s]

    def in_sq(self, s: State) -> bool:
        if s not in self._undesired:
            g = _Ground(self.prog, self._record(s))
            self._undesired[s] = g.atom(self.prog.schema.decision_predicate, self.prog.schema.undesired_value)
        return self._undesired[s]

    def in_goal(self, s: State) -> bool:
        return self.in_sc(s) and not self.in_sq(s)

    # actions, rebuilt independently as (kind, payload) pairs
    def _actions(self) -> list:
        acts = []
        schema = self.prog.schema
        for f in schema.features:
            if f.mutability in (Mutability.FREE, Mutability.MONOTONE):
                for v in self.dom.values[f.name]:
                    acts.append(("direct", f.name, v))
        for r in self.prog.rules:
            if r.kind is not RuleKind.CAUSAL:
                continue
            options = {}
            for lit in r.body:
                if isinstance(lit.atom, Defined):
                    continue
                f = lit.atom.feature
                pool = options.get(f, list(self.dom.values[f]))
                keep = []
                for v in pool:
                    g = _Ground(self.prog, {f: _concrete(v)})
                    if g.literal(lit):
                        keep.append(v)
                options[f] = keep
            heads = [v for v in self.dom.values[r.head] if _in_head(_concrete(v), r.value)]
            if heads and all(options.values()):
                acts.append(("causal", options, heads, r.head))
        return acts

    def _choose(self, f: str, cur, allowed: list, changeable: bool):
        if cur in allowed:
            return cur
        if not changeable:
            return None
        decl = self.prog.schema.feature(f)
        if decl.mutability is Mutability.MONOTONE:
            order = list(self.dom.values[f])
            allowed = [v for v in allowed if order.index(v) > order.index(cur)]
        return allowed[0] if allowed else None

    def apply(self, s: State, act) -> Optional[State]:
        rec = dict(zip(self.names, s))
        schema = self.prog.schema
        if act[0] == "direct":
            _, f, v = act
            decl = schema.feature(f)
            order = list(self.dom.values[f])
            if decl.mutability is Mutability.MONOTONE and order.index(v) < order.index(rec[f]):
                return None
            rec[f] = v
        else:
            _, options, heads, head = act
            for f in self.names:
                if f not in options:
                    continue
                mut = schema.feature(f).mutability
                v = self._choose(f, rec[f], options[f], mut in (Mutability.FREE, Mutability.MONOTONE))
                if v is None:
                    return None
                rec[f] = v
            v = self._choose(head, rec[head], heads, schema.feature(head).mutability is not Mutability.IMMUTABLE)
            if v is None:
                return None
            rec[head] = v
        return tuple(rec[n] for n in self.names)

    def raw_successors(self, s: State) -> set:
        out = set()
        for act in self.actions:
            t = self.apply(s, act)
            if t is not None and t != s:
                out.add(t)
        return out

    def closure(self, t: State) -> frozenset:
        """Consistent states reachable from ``t`` through inconsistent states only."""
        if self.in_sc(t):
            return frozenset([t])
        if t in self._closure:
            return self._closure[t]
        found, seen, queue = set(), {t}, deque([t])
        while queue:
            u = queue.popleft()
            for w in self.raw_successors(u):
                if w in seen:
                    continue
                seen.add(w)
                if self.in_sc(w):
                    found.add(w)
                else:
                    queue.append(w)
        result = frozenset(found)
        self._closure[t] = result
        return result

    def delta(self, s: State) -> set:
        """All consistent states one action plus repair away from ``s``."""
        out = set()
        for t in self.raw_successors(s):
            out |= self.closure(t)
        out.discard(s)
        return out


def oracle_goal_set(dom: AbstractDomain, prog: StratifiedProgram) -> set:
    o = Oracle(prog, dom)
    return {s for s in enumerate_states(dom) if o.in_goal(s)}


class _Unreachable:
    def __repr__(self) -> str:
        return "Unreachable"

    def __bool__(self) -> bool:
        return False


Unreachable = _Unreachable()


@dataclass
class ShortestPath:
    length: int
    path: list
    explored: int = 0


def oracle_shortest_path(problem, oracle: Optional[Oracle] = None):
    """Breadth-first search over the consistent-state transition graph."""
    o = oracle or Oracle(problem.program, problem.domain)
    start = problem.initial
    if not o.in_sc(start):
        raise ValueError("initial state is not causally consistent")
    parent = {start: None}
    queue = deque([start])
    goal = None
    while queue:
        s = queue.popleft()
        if o.in_goal(s):
            goal = s
            break
        for t in sorted(o.delta(s), key=repr):
            if t not in parent:
                parent[t] = s
                queue.append(t)
    assert len(parent) <= problem.domain.size()
    if goal is None:
        return Unreachable
    path = []
    while goal is not None:
        path.append(goal)
        goal = parent[goal]
    path.reverse()
    return ShortestPath(len(path), path, len(parent))


CLAUSES = (
    "starts at the initial state",
    "ends in the goal set",
    "every state is causally consistent",
    "no earlier state is a goal",
    "each step is one action plus repair",
)


@dataclass
class VerificationReport:
    passed: list = field(default_factory=lambda: [True] * 5)
    witnesses: list = field(default_factory=lambda: [None] * 5)

    @property
    def ok(self) -> bool:
        return all(self.passed)

    def fail(self, clause: int, witness) -> None:
        if self.passed[clause - 1]:
            self.passed[clause - 1] = False
            self.witnesses[clause - 1] = witness

    def render(self, dom: Optional[AbstractDomain] = None) -> str:
        lines = []
        for i, (name, ok, w) in enumerate(zip(CLAUSES, self.passed, self.witnesses), start=1):
            line = f"clause {i} ({name}): {'pass' if ok else 'FAIL'}"
            if w is not None:
                line += f"  witness: {_show(w, dom)}"
            lines.append(line)
        lines.append("overall: " + ("pass" if self.ok else "FAIL"))
        return "\n".join(lines)


def _show(w, dom):
    if dom is None:
        return repr(w)
    parts = []
    for item in w if isinstance(w, tuple) else (w,):
        if isinstance(item, tuple) and len(item) == len(dom.names):
            parts.append("{" + ", ".join(f"{n}={value_label(v)}" for n, v in zip(dom.names, item)) + "}")
        else:
            parts.append(str(item))
    return " ".join(parts)


def verify_solution(states: list, problem, oracle: Optional[Oracle] = None) -> VerificationReport:
    """Check a state sequence against the five solution-path clauses."""
    o = oracle or Oracle(problem.program, problem.domain)
    rep = VerificationReport()
    if not states:
        for k in range(1, 6):
            rep.fail(k, "empty path")
        return rep
    if states[0] != problem.initial:
        rep.fail(1, (0, states[0]))
    if not o.in_goal(states[-1]):
        rep.fail(2, (len(states) - 1, states[-1]))
    for i, s in enumerate(states):
        if not o.in_sc(s):
            rep.fail(3, (i, s))
    for i, s in enumerate(states[:-1]):
        if o.in_goal(s):
            rep.fail(4, (i, s))
    for i in range(len(states) - 1):
        if states[i + 1] not in o.delta(states[i]):
            rep.fail(5, (i, states[i], states[i + 1]))
    return rep
