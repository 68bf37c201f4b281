"""Finite abstraction of the state space.

Numeric features are split at every threshold the program mentions, so all
concrete values inside one cell satisfy exactly the same rule literals.  A
state is a tuple of abstract values in schema feature order: a symbol for a
categorical feature, a ``Cell`` for a numeric one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Union

from .rules import (
    FeatureGt,
    FeatureLeq,
    NumericHead,
    Schema,
    SchemaError,
    StratifiedProgram,
    format_number,
)


@dataclass(frozen=True, order=True)
class Cell:
    """Numeric interval ``(lo, hi]``, or ``[lo, hi]`` for the first cell."""

    index: int
    lo: Fraction
    hi: Fraction
    closed_lo: bool = False

    def contains(self, x: Fraction) -> bool:
        above = x >= self.lo if self.closed_lo else x > self.lo
        return above and x <= self.hi

    def all_leq(self, t: Fraction) -> bool:
        return self.hi <= t

    def all_gt(self, t: Fraction) -> bool:
        return self.lo > t or (self.lo == t and not self.closed_lo)

    def representative(self) -> Fraction:
        return self.hi

    def label(self) -> str:
        left = "[" if self.closed_lo else "("
        return f"{left}{format_number(self.lo)}, {format_number(self.hi)}]"

    def __str__(self) -> str:
        return self.label()


AbstractValue = Union[str, Cell]
State = tuple  # tuple[AbstractValue, ...] in schema feature order


def value_label(v: AbstractValue) -> str:
    return v.label() if isinstance(v, Cell) else v


class AbstractDomain:
    """Per-feature ordered value lists for a schema under a program."""

    def __init__(self, schema: Schema, values: Mapping[str, tuple]):
        self.schema = schema
        self.names = schema.names
        self.values = {n: tuple(values[n]) for n in self.names}
        self._pos = {n: {v: i for i, v in enumerate(self.values[n])} for n in self.names}
        self._idx = {n: i for i, n in enumerate(self.names)}

    def index(self, feature: str) -> int:
        return self._idx[feature]

    def values_of(self, feature: str) -> tuple:
        return self.values[feature]

    def position(self, feature: str, value: AbstractValue) -> int:
        return self._pos[feature][value]

    def size(self) -> int:
        n = 1
        for name in self.names:
            n *= len(self.values[name])
        return n

    def cells(self, feature: str) -> tuple[Cell, ...]:
        if not self.schema.feature(feature).numeric:
            raise KeyError(f"{feature!r} is not numeric")
        return self.values[feature]

    def is_valid(self, state: State) -> bool:
        return len(state) == len(self.names) and all(
            v in self._pos[n] for n, v in zip(self.names, state)
        )

    def as_dict(self, state: State) -> dict[str, AbstractValue]:
        return dict(zip(self.names, state))

    def labels(self, state: State) -> dict[str, str]:
        return {n: value_label(v) for n, v in zip(self.names, state)}

    def parse_label(self, feature: str, label: str) -> AbstractValue:
        for v in self.values[feature]:
            if value_label(v) == label:
                return v
        raise ValueError(f"{label!r} is not a value of {feature!r}")

    def replace(self, state: State, feature: str, value: AbstractValue) -> State:
        i = self._idx[feature]
        return state[:i] + (value,) + state[i + 1 :]


def program_thresholds(prog: StratifiedProgram) -> dict[str, set[Fraction]]:
    out: dict[str, set[Fraction]] = {}
    for rule in prog.rules:
        for lit in rule.body:
            if isinstance(lit.atom, (FeatureLeq, FeatureGt)):
                out.setdefault(lit.atom.feature, set()).add(lit.atom.threshold)
        if isinstance(rule.value, NumericHead):
            for t in (rule.value.lo, rule.value.hi):
                if t is not None:
                    out.setdefault(rule.head, set()).add(t)
    return out


def make_cells(lo: Fraction, hi: Fraction, thresholds) -> tuple[Cell, ...]:
    bounds = sorted(t for t in set(thresholds) if t < hi)
    cells = []
    prev, closed = lo, True
    for t in bounds + [hi]:
        cells.append(Cell(len(cells), prev, t, closed))
        prev, closed = t, False
    return tuple(cells)


def cellify(schema: Schema, prog: StratifiedProgram) -> AbstractDomain:
    """Split each numeric domain at the thresholds the program uses on it."""
    thresholds = program_thresholds(prog)
    values: dict[str, tuple] = {}
    for f in schema.features:
        if not f.numeric:
            values[f.name] = f.values
            continue
        ts = thresholds.get(f.name, set())
        bad = sorted(t for t in ts if t < f.min or t > f.max)
        if bad:
            raise SchemaError(
                f"threshold {format_number(bad[0])} on {f.name!r} lies outside "
                f"[{format_number(f.min)}, {format_number(f.max)}]"
            )
        values[f.name] = make_cells(f.min, f.max, ts)
    return AbstractDomain(schema, values)


def abstract_value(dom: AbstractDomain, feature: str, raw) -> AbstractValue:
    decl = dom.schema.feature(feature)
    if decl.numeric:
        try:
            x = Fraction(str(raw).strip())
        except ValueError:
            raise ValueError(f"{feature}: {raw!r} is not a number") from None
        for cell in dom.values[feature]:
            if cell.contains(x):
                return cell
        raise ValueError(
            f"{feature}: {raw} lies outside [{format_number(decl.min)}, {format_number(decl.max)}]"
        )
    value = str(raw).strip()
    if value not in decl.values:
        raise ValueError(f"{feature}: {value!r} is not a declared value")
    return value


def abstract_state(record: Mapping[str, object], dom: AbstractDomain) -> State:
    """Map a concrete record onto the cell or symbol holding each value."""
    missing = [n for n in dom.names if n not in record]
    if missing:
        raise ValueError(f"record lacks features: {', '.join(missing)}")
    extra = [k for k in record if k not in dom.names]
    if extra:
        raise ValueError(f"record has unknown features: {', '.join(extra)}")
    return tuple(abstract_value(dom, n, record[n]) for n in dom.names)


def enumerate_states(dom: AbstractDomain) -> Iterator[State]:
    """All abstract states, lexicographic in schema feature order."""
    return itertools.product(*(dom.values[n] for n in dom.names))


def enumerate_counterfactuals(dom: AbstractDomain, prog: StratifiedProgram, evaluator=None):
    """Return ``(count, states)`` for every causally consistent, desired state."""
    if evaluator is None:
        from .evaluator import Evaluator

        evaluator = Evaluator(prog, dom)
    found = [s for s in enumerate_states(dom) if evaluator.is_counterfactual(s)]
    return len(found), found
