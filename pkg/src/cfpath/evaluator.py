"""Ground evaluation of a stratified program on abstract states.

Causal rules are read under completion: for a governed feature F and each
distinct head value R used by its rules, ``state[F] in R`` must hold exactly
when some rule body for ``(F, R)`` holds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .abstraction import AbstractDomain, Cell, State, value_label
from .rules import (
    Defined,
    FeatureEq,
    FeatureLeq,
    HeadValue,
    Literal,
    NumericHead,
    Rule,
    StratifiedProgram,
)


class UndecidableLiteral(RuntimeError):
    """A numeric cell straddles a literal's threshold."""


@dataclass
class DerivedEnv:
    truth: dict = field(default_factory=dict)  # (predicate, value) -> bool

    def holds(self, predicate: str, value) -> bool:
        return self.truth.get((predicate, value), False)

    def derived_values(self, predicate: str) -> list:
        return [v for (p, v), t in self.truth.items() if p == predicate and t]


def _feature_value(state: State, dom: AbstractDomain, feature: str):
    return state[dom.index(feature)]


def eval_literal(state: State, lit: Literal, env: DerivedEnv, dom: AbstractDomain) -> bool:
    atom = lit.atom
    if isinstance(atom, Defined):
        val = env.holds(atom.predicate, atom.value)
    elif isinstance(atom, FeatureEq):
        val = _feature_value(state, dom, atom.feature) == atom.value
    else:
        cell = _feature_value(state, dom, atom.feature)
        if not isinstance(cell, Cell):
            raise TypeError(f"{atom.feature!r} holds a symbol, not a numeric cell")
        if cell.all_leq(atom.threshold):
            leq = True
        elif cell.all_gt(atom.threshold):
            leq = False
        else:
            raise UndecidableLiteral(f"{cell.label()} straddles {atom.threshold} on {atom.feature!r}")
        val = leq if isinstance(atom, FeatureLeq) else not leq
    return val != lit.negated


def in_head_value(value, head: HeadValue) -> bool:
    """Whether an abstract value lies inside a rule head value."""
    if isinstance(head, NumericHead):
        if not isinstance(value, Cell):
            raise TypeError("numeric head on a categorical feature")
        low_ok = head.lo is None or value.all_gt(head.lo)
        high_ok = head.hi is None or value.all_leq(head.hi)
        if low_ok and high_ok:
            return True
        low_out = head.lo is not None and value.all_leq(head.lo)
        high_out = head.hi is not None and value.all_gt(head.hi)
        if low_out or high_out:
            return False
        raise UndecidableLiteral(f"{value.label()} straddles a causal head bound")
    return value == head


def body_holds(state: State, rule: Rule, env: DerivedEnv, dom: AbstractDomain) -> bool:
    return all(eval_literal(state, lit, env, dom) for lit in rule.body)


def derive_predicates(state: State, prog: StratifiedProgram, dom: AbstractDomain) -> DerivedEnv:
    """Compute every head atom bottom-up, one stratum at a time."""
    env = DerivedEnv()
    by_head: dict[str, list[Rule]] = {}
    for r in prog.rules:
        by_head.setdefault(r.head, []).append(r)
    for stratum in prog.strata:
        rules = [r for p in sorted(stratum) for r in by_head.get(p, [])]
        for r in rules:
            env.truth.setdefault((r.head, r.value), False)
        # positive recursion inside a stratum needs a fixpoint
        changed = True
        while changed:
            changed = False
            for r in rules:
                if not env.truth[(r.head, r.value)] and body_holds(state, r, env, dom):
                    env.truth[(r.head, r.value)] = True
                    changed = True
    return env


def causal_head_atoms(prog: StratifiedProgram) -> list[tuple[str, HeadValue]]:
    seen: dict[tuple, None] = {}
    for r in prog.ruleset.causal:
        seen.setdefault((r.head, r.value), None)
    return list(seen)


class Evaluator:
    """Caching evaluator bound to one program and abstract domain."""

    def __init__(self, prog: StratifiedProgram, dom: AbstractDomain):
        self.prog = prog
        self.dom = dom
        self.undesired = prog.schema.undesired_value
        self.decision = prog.schema.decision_predicate
        self.atoms = causal_head_atoms(prog)
        self._env: dict[State, DerivedEnv] = {}
        self._consistent: dict[State, bool] = {}

    def derive(self, state: State) -> DerivedEnv:
        env = self._env.get(state)
        if env is None:
            env = derive_predicates(state, self.prog, self.dom)
            self._env[state] = env
        return env

    def satisfies_decision(self, state: State) -> bool:
        return self.derive(state).holds(self.decision, self.undesired)

    def violations(self, state: State) -> list[tuple[str, HeadValue]]:
        """Causal head atoms whose completion is broken in ``state``."""
        env = self.derive(state)
        bad = []
        for feature, head in self.atoms:
            inside = in_head_value(state[self.dom.index(feature)], head)
            if inside != env.holds(feature, head):
                bad.append((feature, head))
        return bad

    def is_causally_consistent(self, state: State) -> bool:
        ok = self._consistent.get(state)
        if ok is None:
            ok = not self.violations(state)
            self._consistent[state] = ok
        return ok

    def is_counterfactual(self, state: State) -> bool:
        return self.is_causally_consistent(state) and not self.satisfies_decision(state)


def satisfies_decision(state: State, prog: StratifiedProgram, dom: AbstractDomain) -> bool:
    return Evaluator(prog, dom).satisfies_decision(state)


def is_causally_consistent(state: State, prog: StratifiedProgram, dom: AbstractDomain) -> bool:
    return Evaluator(prog, dom).is_causally_consistent(state)


def is_counterfactual(state: State, prog: StratifiedProgram, dom: AbstractDomain) -> bool:
    return Evaluator(prog, dom).is_counterfactual(state)


# --- coverage diagnostics -------------------------------------------------------


def _body_features(prog: StratifiedProgram, rules: list[Rule]) -> list[str]:
    """Schema features that can influence the given rule bodies."""
    feats: set[str] = set()
    seen_preds: set[str] = set()
    stack = list(rules)
    while stack:
        r = stack.pop()
        for lit in r.body:
            if isinstance(lit.atom, Defined):
                p = lit.atom.predicate
                if p not in seen_preds:
                    seen_preds.add(p)
                    stack.extend(x for x in prog.rules if x.head == p)
            else:
                feats.add(lit.atom.feature)
    return [n for n in prog.schema.names if n in feats]


def coverage_warnings(prog: StratifiedProgram, dom: AbstractDomain, limit: int = 100_000) -> list[str]:
    """Report body combinations where a governed feature has no legal value."""
    warnings = []
    ev = Evaluator(prog, dom)
    base = tuple(dom.values[n][0] for n in dom.names)
    for feature in prog.ruleset.governed_features():
        rules = [r for r in prog.ruleset.causal if r.head == feature]
        heads = list(dict.fromkeys(r.value for r in rules))
        inputs = _body_features(prog, rules)
        combos = 1
        for n in inputs:
            combos *= len(dom.values[n])
        if combos > limit:
            continue
        gaps = overlaps = 0
        example_gap = example_overlap = None
        for combo in itertools.product(*(dom.values[n] for n in inputs)):
            state = base
            for n, v in zip(inputs, combo):
                state = dom.replace(state, n, v)
            env = ev.derive(state)
            derived = [h for h in heads if env.holds(feature, h)]
            legal = [
                v
                for v in dom.values[feature]
                if all(in_head_value(v, h) == (h in derived) for h in heads)
            ]
            if not legal:
                where = ", ".join(f"{n}={value_label(v)}" for n, v in zip(inputs, combo))
                if len(derived) > 1:
                    overlaps += 1
                    example_overlap = example_overlap or where
                else:
                    gaps += 1
                    example_gap = example_gap or where
        if overlaps:
            warnings.append(
                f"{feature}: {overlaps} input combination(s) derive conflicting values, e.g. {example_overlap}"
            )
        if gaps:
            warnings.append(
                f"{feature}: {gaps} input combination(s) leave no consistent value, e.g. {example_gap}"
            )
    return warnings


__all__ = [
    "DerivedEnv",
    "Evaluator",
    "UndecidableLiteral",
    "body_holds",
    "causal_head_atoms",
    "coverage_warnings",
    "derive_predicates",
    "eval_literal",
    "in_head_value",
    "is_causally_consistent",
    "is_counterfactual",
    "satisfies_decision",
]
