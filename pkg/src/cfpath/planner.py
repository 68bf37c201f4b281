"""Backtracking search for causally consistent counterfactual paths.

The trail is a list of ``VisitedEntry`` records, each holding a state and the
actions already attempted from it.  ``intervene`` moves from one consistent
state to the next; ``make_consistent`` repairs the causally inconsistent
states an action may leave behind.  Neither ever revisits a state on the trail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

from .abstraction import AbstractDomain, Cell, State, cellify, value_label
from .evaluator import Evaluator, eval_literal, DerivedEnv
from .rules import (
    Defined,
    Literal,
    Mutability,
    NumericHead,
    Rule,
    Schema,
    StratifiedProgram,
)

DEFAULT_CAP = 10


class MutabilityError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class StepGuardTripped(RuntimeError):
    pass


class PlanningFailure(Exception):
    """The search ran out of options.

    ``reason`` is ``"exhausted"`` when every reachable state was tried and
    ``"length_cap"`` when some branch was cut by the path-length bound.
    """

    def __init__(self, reason: str, deepest_trail: list, bound: Optional[int] = None):
        self.reason = reason
        self.deepest_trail = deepest_trail
        self.bound = bound
        msg = "no counterfactual path: " + (
            "search space exhausted" if reason == "exhausted" else f"path length cap {bound} reached"
        )
        super().__init__(msg)


# --- actions --------------------------------------------------------------------


@dataclass(frozen=True)
class DirectAction:
    feature: str
    value: object

    kind = "Direct"

    def describe(self) -> str:
        return f"Direct {self.feature} -> {value_label(self.value)}"


@dataclass(frozen=True)
class CausalAction:
    """Drive ``head_feature`` through causal rule ``rule_id``.

    ``body_assignment`` is the canonical satisfying value for each feature the
    rule body tests; ``allowed`` lists every satisfying value so that features
    already satisfying the body are left alone when the action is applied.
    """

    rule_id: int
    rule: Rule
    body_assignment: tuple  # ((feature, value), ...)
    allowed: tuple  # ((feature, (value, ...)), ...)
    head_feature: str
    head_value: object
    head_allowed: tuple

    kind = "Causal"

    def describe(self) -> str:
        return f"Causal {self.head_feature} -> {value_label(self.head_value)} (rule {self.rule_id})"


Action = Union[DirectAction, CausalAction]


@dataclass(frozen=True)
class ActionSet:
    direct: tuple[DirectAction, ...] = ()
    causal: tuple[CausalAction, ...] = ()

    def ordered(self, causal_first: bool) -> tuple:
        return self.causal + self.direct if causal_first else self.direct + self.causal

    def __len__(self) -> int:
        return len(self.direct) + len(self.causal)


def _satisfying(dom: AbstractDomain, feature: str, lits: list[Literal]) -> tuple:
    env = DerivedEnv()
    out = []
    base = tuple(dom.values[n][0] for n in dom.names)
    for v in dom.values[feature]:
        s = dom.replace(base, feature, v)
        if all(eval_literal(s, lit, env, dom) for lit in lits):
            out.append(v)
    return tuple(out)


def _head_values(dom: AbstractDomain, rule: Rule) -> tuple:
    if isinstance(rule.value, NumericHead):
        return tuple(c for c in dom.values[rule.head] if _cell_in(c, rule.value))
    return (rule.value,)


def _cell_in(cell: Cell, head: NumericHead) -> bool:
    return (head.lo is None or cell.all_gt(head.lo)) and (head.hi is None or cell.all_leq(head.hi))


def generate_actions(schema: Schema, dom: AbstractDomain, prog: StratifiedProgram) -> ActionSet:
    """Direct actions for every directly actionable value, one causal action per rule."""
    direct = []
    for f in schema.features:
        if f.mutability in (Mutability.FREE, Mutability.MONOTONE):
            direct.extend(DirectAction(f.name, v) for v in dom.values[f.name])

    causal = []
    for rule_id, rule in enumerate(prog.rules):
        if rule not in prog.ruleset.causal:
            continue
        by_feature: dict[str, list[Literal]] = {}
        for lit in rule.body:
            if not isinstance(lit.atom, Defined):
                by_feature.setdefault(lit.atom.feature, []).append(lit)
        allowed = []
        for name in schema.names:
            if name in by_feature:
                allowed.append((name, _satisfying(dom, name, by_feature[name])))
        head_allowed = _head_values(dom, rule)
        if not head_allowed or any(not vals for _, vals in allowed):
            continue  # the rule can never fire
        causal.append(
            CausalAction(
                rule_id=rule_id,
                rule=rule,
                body_assignment=tuple((n, vals[0]) for n, vals in allowed),
                allowed=tuple(allowed),
                head_feature=rule.head,
                head_value=head_allowed[0],
                head_allowed=head_allowed,
            )
        )
    return ActionSet(tuple(direct), tuple(causal))


def _pick(dom: AbstractDomain, feature: str, current, allowed: tuple, may_change: bool):
    if current in allowed:
        return current
    if not may_change:
        raise MutabilityError(f"{feature!r} cannot be changed by this action")
    if dom.schema.feature(feature).mutability is Mutability.MONOTONE:
        floor = dom.position(feature, current)
        allowed = tuple(v for v in allowed if dom.position(feature, v) > floor)
        if not allowed:
            raise MutabilityError(f"{feature!r} may only increase")
    return allowed[0]


def apply_action(s: State, a: Action, dom: AbstractDomain) -> State:
    """Successor of ``s`` under ``a``; raises MutabilityError if not permitted."""
    if isinstance(a, DirectAction):
        decl = dom.schema.feature(a.feature)
        cur = s[dom.index(a.feature)]
        if cur == a.value:
            return s
        if decl.mutability in (Mutability.IMMUTABLE, Mutability.CAUSAL_ONLY):
            raise MutabilityError(f"{a.feature!r} is not directly actionable")
        if decl.mutability is Mutability.MONOTONE and dom.position(a.feature, a.value) < dom.position(
            a.feature, cur
        ):
            raise MutabilityError(f"{a.feature!r} may only increase")
        return dom.replace(s, a.feature, a.value)

    out = s
    for feature, allowed in a.allowed:
        mut = dom.schema.feature(feature).mutability
        may = mut in (Mutability.FREE, Mutability.MONOTONE)
        out = dom.replace(out, feature, _pick(dom, feature, s[dom.index(feature)], allowed, may))
    head_mut = dom.schema.feature(a.head_feature).mutability
    cur = out[dom.index(a.head_feature)]
    out = dom.replace(
        out, a.head_feature, _pick(dom, a.head_feature, cur, a.head_allowed, head_mut is not Mutability.IMMUTABLE)
    )
    return out


def try_apply(s: State, a: Action, dom: AbstractDomain) -> Optional[State]:
    try:
        return apply_action(s, a, dom)
    except MutabilityError:
        return None


# --- problem and trail ------------------------------------------------------------


@dataclass
class CFGProblem:
    schema: Schema
    program: StratifiedProgram
    domain: AbstractDomain
    initial: State
    actions: ActionSet
    max_path_len: Optional[int] = None
    evaluator: Evaluator = None

    def __post_init__(self):
        if self.evaluator is None:
            self.evaluator = Evaluator(self.program, self.domain)
        if self.max_path_len is not None and self.max_path_len < 1:
            raise ValueError("max_path_len must be a positive integer")

    def with_bound(self, bound: Optional[int]) -> "CFGProblem":
        return CFGProblem(
            self.schema, self.program, self.domain, self.initial, self.actions, bound, self.evaluator
        )


def build_problem(program: StratifiedProgram, initial: State, max_path_len: Optional[int] = None,
                  domain: Optional[AbstractDomain] = None) -> CFGProblem:
    dom = domain if domain is not None else cellify(program.schema, program)
    actions = generate_actions(program.schema, dom, program)
    return CFGProblem(program.schema, program, dom, initial, actions, max_path_len)


@dataclass
class VisitedEntry:
    state: State
    tried: list = field(default_factory=list)
    slots: float = math.inf  # consistent states that may still be added


@dataclass
class Step:
    """One visible transition: the actions applied and the states passed through."""

    actions: tuple
    through: tuple = ()  # causally inconsistent intermediates


@dataclass
class CandidatePath:
    states: list
    steps: list  # len(states) - 1 Step records

    def __len__(self) -> int:
        return len(self.states)

    def feature_kinds(self, dom: AbstractDomain, i: int) -> dict[str, str]:
        """Label each feature Direct, Causal or N/A for transition ``i``."""
        kinds = {n: "N/A" for n in dom.names}
        chain = [self.states[i], *self.steps[i].through, self.states[i + 1]]
        for a, (before, after) in zip(self.steps[i].actions, zip(chain, chain[1:])):
            for n, x, y in zip(dom.names, before, after):
                if x != y:
                    kinds[n] = a.kind
        for n, x, y in zip(dom.names, self.states[i], self.states[i + 1]):
            if x == y:
                kinds[n] = "N/A"
        return kinds


def drop_inconsistent(visited: list, evaluator: Evaluator) -> CandidatePath:
    """Keep the consistent trail entries, annotating the actions between them."""
    states, steps = [], []
    pending_actions: list = []
    pending_states: list = []
    for k, entry in enumerate(visited):
        if evaluator.is_causally_consistent(entry.state):
            if states:
                steps.append(Step(tuple(pending_actions), tuple(pending_states)))
            states.append(entry.state)
            pending_actions, pending_states = [], []
        else:
            pending_states.append(entry.state)
        if k + 1 < len(visited) and entry.tried:
            pending_actions.append(entry.tried[-1])
    return CandidatePath(states, steps)


def update(s: State, visited: list, actions_taken: list, a: Action, dom: AbstractDomain):
    """Record ``a`` as tried from ``s``, push ``s``, and move to ``a(s)``."""
    actions_taken = actions_taken + [a]
    visited = visited + [VisitedEntry(s, actions_taken)]
    return (apply_action(s, a, dom), []), visited


# --- search engine ----------------------------------------------------------------


class _Search:
    def __init__(self, problem: CFGProblem, memo: bool = True, step_limit: Optional[int] = None):
        self.p = problem
        self.dom = problem.domain
        self.ev = problem.evaluator
        self.bound = problem.max_path_len
        self.memo = memo
        self.fail: dict[State, float] = {}
        self.trail: list[VisitedEntry] = []
        self.on_trail: set = set()
        self.deepest: list = []
        self.hit_cap = False
        self.steps = 0
        n_actions = len(problem.actions) + 1
        levels = (self.bound + 2) if self.bound is not None else 2
        self.step_limit = step_limit if step_limit is not None else self.dom.size() * n_actions * levels + 64
        self.intervene_order = problem.actions.ordered(causal_first=False)
        self.repair_order = problem.actions.ordered(causal_first=True)

    # trail primitives
    def push(self, e: VisitedEntry) -> None:
        self.trail.append(e)
        self.on_trail.add(e.state)
        if len(self.trail) > len(self.deepest):
            self.deepest = [x.state for x in self.trail]

    def pop(self) -> VisitedEntry:
        if not self.trail:
            raise self.failure()
        e = self.trail.pop()
        self.on_trail.discard(e.state)
        return e

    def failure(self) -> PlanningFailure:
        return PlanningFailure("length_cap" if self.hit_cap else "exhausted", list(self.deepest), self.bound)

    def abandon(self, e: VisitedEntry) -> None:
        if self.memo:
            self.fail[e.state] = max(self.fail.get(e.state, -1), e.slots)

    def select(self, e: VisitedEntry, order: tuple, fresh_first: bool = False):
        self.steps += 1
        if self.steps > self.step_limit:
            raise StepGuardTripped(f"step guard tripped after {self.step_limit} selections")
        if fresh_first:
            # direct edits to features the trail already moved go last; same candidates
            moved = {n for n, x, y in zip(self.dom.names, self.p.initial, e.state) if x != y}
            late = [a for a in order if isinstance(a, DirectAction) and a.feature in moved]
            if late:
                order = [a for a in order if a not in late] + late
        for a in order:
            if a in e.tried:
                continue
            nxt = try_apply(e.state, a, self.dom)
            if nxt is None or nxt == e.state or nxt in self.on_trail:
                continue
            consistent = self.ev.is_causally_consistent(nxt)
            slots = e.slots - 1 if consistent else e.slots
            if slots < 0:
                continue
            if self.memo and self.fail.get(nxt, -1) >= slots:
                continue
            return a, nxt, slots
        return None

    def make_consistent(self, e: VisitedEntry) -> VisitedEntry:
        while not self.ev.is_causally_consistent(e.state):
            choice = self.select(e, self.repair_order)
            if choice is None:
                self.abandon(e)
                e = self.pop()
                continue
            a, nxt, slots = choice
            e.tried.append(a)
            self.push(e)
            e = VisitedEntry(nxt, [], slots)
        return e

    def intervene(self) -> None:
        e = self.pop()
        choice = None
        if e.slots >= 1:
            choice = self.select(e, self.intervene_order, fresh_first=True)
        else:
            self.hit_cap = True
        if choice is None:
            self.abandon(e)
            if not self.trail:
                raise self.failure()
            if not self.ev.is_causally_consistent(self.trail[-1].state):
                self.push(self.make_consistent(self.pop()))
            return
        a, nxt, slots = choice
        e.tried.append(a)
        self.push(e)
        self.push(self.make_consistent(VisitedEntry(nxt, [], slots)))

    def run(self) -> CandidatePath:
        if not self.ev.is_causally_consistent(self.p.initial):
            raise PreconditionError("initial state is not causally consistent")
        slots = math.inf if self.bound is None else self.bound - 1
        self.push(VisitedEntry(self.p.initial, [], slots))
        while not self.ev.is_counterfactual(self.trail[-1].state):
            self.intervene()
        return drop_inconsistent(self.trail, self.ev)


def find_path(problem: CFGProblem, *, memo: bool = True, step_limit: Optional[int] = None) -> CandidatePath:
    """Depth-first search from the initial state until a counterfactual is reached."""
    return _Search(problem, memo=memo, step_limit=step_limit).run()


def find_minimal_path(problem: CFGProblem, cap: Optional[int] = None, *, memo: bool = True) -> CandidatePath:
    """Iterative deepening on the number of consistent states in the path."""
    cap = cap if cap is not None else (problem.max_path_len or DEFAULT_CAP)
    last: Optional[PlanningFailure] = None
    for bound in range(1, cap + 1):
        try:
            return find_path(problem.with_bound(bound), memo=memo)
        except PlanningFailure as exc:
            last = exc
            if exc.reason == "exhausted":
                raise  # the bound never mattered, so no larger bound helps
    assert last is not None
    raise last


# thin wrappers exposing the individual search steps on an explicit trail


def _engine_for(problem: CFGProblem, visited: list) -> _Search:
    eng = _Search(problem.with_bound(None), memo=False)
    for entry in visited:
        eng.push(VisitedEntry(entry.state, list(entry.tried)))
    return eng


def make_consistent(s: State, actions_taken: list, visited: list, problem: CFGProblem):
    """Repair ``s`` until it is causally consistent; returns ((state, tried), trail)."""
    eng = _engine_for(problem, visited)
    e = eng.make_consistent(VisitedEntry(s, list(actions_taken)))
    return (e.state, e.tried), eng.trail


def intervene(visited: list, problem: CFGProblem) -> list:
    """One intervention step from the consistent state at the end of the trail."""
    eng = _engine_for(problem, visited)
    eng.intervene()
    return eng.trail


__all__ = [
    "ActionSet",
    "CFGProblem",
    "CandidatePath",
    "CausalAction",
    "DirectAction",
    "MutabilityError",
    "PlanningFailure",
    "PreconditionError",
    "Step",
    "StepGuardTripped",
    "VisitedEntry",
    "apply_action",
    "build_problem",
    "drop_inconsistent",
    "find_minimal_path",
    "find_path",
    "generate_actions",
    "intervene",
    "make_consistent",
    "update",
]

