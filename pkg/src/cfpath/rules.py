"""Rule language front end: feature schemas, decision/causal rules, stratification.

Rule sources use a small Prolog-like fragment::

    label(X,'good') :- not checking_account_status(X,'no_checking_account'),
                       credit_amount(X,N2), not(N2=<428.0),
                       not ab1(X,'True').

A numeric binding ``f(X,N)`` followed by ``N=<c`` fuses into a single
``FeatureLeq`` test, and ``not(N=<c)`` fuses into ``FeatureGt``.  Causal rules
on a numeric feature bind the head variable and constrain it in the body::

    credit_score(X,N) :- debt(X,D), D=<0, not(N=<599).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Union

import networkx as nx


class RuleSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


class SchemaError(ValueError):
    pass


class StratificationError(ValueError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("negation cycle through " + " -> ".join(cycle))


class Mutability(str, enum.Enum):
    FREE = "free"
    IMMUTABLE = "immutable"
    MONOTONE = "monotone"
    CAUSAL_ONLY = "causal_only"


@dataclass(frozen=True)
class FeatureDecl:
    name: str
    kind: str  # "categorical" | "numeric"
    values: tuple[str, ...] = ()
    min: Optional[Fraction] = None
    max: Optional[Fraction] = None
    mutability: Mutability = Mutability.FREE

    @property
    def numeric(self) -> bool:
        return self.kind == "numeric"


@dataclass(frozen=True)
class Schema:
    features: tuple[FeatureDecl, ...]
    decision_predicate: str
    undesired_value: str

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def feature(self, name: str) -> FeatureDecl:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __contains__(self, name: str) -> bool:
        return name in self.names


# --- atoms and literals -----------------------------------------------------


@dataclass(frozen=True)
class FeatureEq:
    feature: str
    value: str


@dataclass(frozen=True)
class FeatureLeq:
    feature: str
    threshold: Fraction


@dataclass(frozen=True)
class FeatureGt:
    feature: str
    threshold: Fraction


@dataclass(frozen=True)
class Defined:
    predicate: str
    value: str


Atom = Union[FeatureEq, FeatureLeq, FeatureGt, Defined]


@dataclass(frozen=True)
class Literal:
    atom: Atom
    negated: bool = False  # negation as failure

    @property
    def feature(self) -> Optional[str]:
        return None if isinstance(self.atom, Defined) else self.atom.feature


@dataclass(frozen=True)
class NumericHead:
    """Head value of a causal rule on a numeric feature: the range (lo, hi]."""

    lo: Optional[Fraction] = None
    hi: Optional[Fraction] = None

    def contains(self, x: Fraction) -> bool:
        return (self.lo is None or x > self.lo) and (self.hi is None or x <= self.hi)


HeadValue = Union[str, NumericHead]


class RuleKind(str, enum.Enum):
    DECISION = "decision"
    CAUSAL = "causal"
    AUXILIARY = "auxiliary"


@dataclass(frozen=True)
class Rule:
    head: str
    value: HeadValue
    body: tuple[Literal, ...]
    kind: RuleKind

    @property
    def is_fact(self) -> bool:
        return not self.body


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...] = ()

    def of_kind(self, kind: RuleKind) -> list[Rule]:
        return [r for r in self.rules if r.kind is kind]

    @property
    def decision(self) -> list[Rule]:
        return self.of_kind(RuleKind.DECISION)

    @property
    def causal(self) -> list[Rule]:
        return self.of_kind(RuleKind.CAUSAL)

    @property
    def auxiliary(self) -> list[Rule]:
        return self.of_kind(RuleKind.AUXILIARY)

    @property
    def head_predicates(self) -> set[str]:
        return {r.head for r in self.rules}

    def governed_features(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.causal:
            seen.setdefault(r.head, None)
        return list(seen)

    def __len__(self) -> int:
        return len(self.rules)


@dataclass(frozen=True)
class StratifiedProgram:
    schema: Schema
    ruleset: RuleSet
    strata: tuple[frozenset[str], ...] = field(default=())

    @property
    def rules(self) -> tuple[Rule, ...]:
        return self.ruleset.rules


# --- schema parsing -----------------------------------------------------------

_VALUE_RE = re.compile(r"'([^']*)'|`([^']*)'|([^,\s{}]+)")
_FLAGS = {
    "free": Mutability.FREE,
    "immutable": Mutability.IMMUTABLE,
    "monotone": Mutability.MONOTONE,
    "causal_only": Mutability.CAUSAL_ONLY,
}


def _strip_comment(line: str) -> str:
    # '#' and '%' start a comment unless quoted
    out, quote = [], False
    for ch in line:
        if ch == "'":
            quote = not quote
        elif ch in "#%" and not quote:
            break
        out.append(ch)
    return "".join(out).strip()


def _unquote(tok: str) -> str:
    if len(tok) >= 2 and tok[0] in "'`" and tok[-1] == "'":
        return tok[1:-1]
    return tok


def parse_schema(text: str) -> Schema:
    """Parse the line-based schema format.

    ``feature <name> categorical {v1, v2, ...} [flag]``,
    ``feature <name> numeric <min> <max> [flag]`` and
    ``decision <predicate> undesired '<value>'``.
    """
    features: list[FeatureDecl] = []
    decision: Optional[tuple[str, str]] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "decision":
            m = re.fullmatch(r"(\w+)\s+undesired\s+(.+)", rest)
            if not m:
                raise SchemaError(f"line {lineno}: expected `decision <pred> undesired '<value>'`")
            if decision is not None:
                raise SchemaError(f"line {lineno}: more than one decision predicate")
            decision = (m.group(1), _unquote(m.group(2).strip()))
        elif head == "feature":
            features.append(_parse_feature(rest, lineno))
        else:
            raise SchemaError(f"line {lineno}: unknown declaration {head!r}")

    names = [f.name for f in features]
    for name in names:
        if names.count(name) > 1:
            raise SchemaError(f"duplicate feature {name!r}")
    if decision is None:
        raise SchemaError("missing decision declaration")
    if decision[0] in names:
        raise SchemaError(f"decision predicate {decision[0]!r} clashes with a feature name")
    return Schema(tuple(features), decision[0], decision[1])


def _parse_feature(rest: str, lineno: int) -> FeatureDecl:
    m = re.fullmatch(r"(\w+)\s+categorical\s*\{(.*)\}\s*(\w+)?", rest)
    if m:
        name, body, flag = m.groups()
        values = [a or b or c for a, b, c in _VALUE_RE.findall(body)]
        if not values:
            raise SchemaError(f"line {lineno}: empty categorical domain for {name!r}")
        if len(set(values)) != len(values):
            raise SchemaError(f"line {lineno}: duplicate values in domain of {name!r}")
        return FeatureDecl(name, "categorical", tuple(values), mutability=_flag(flag, lineno))
    m = re.fullmatch(r"(\w+)\s+numeric\s+(\S+)\s+(\S+)\s*(\w+)?", rest)
    if m:
        name, lo, hi, flag = m.groups()
        try:
            lo_q, hi_q = Fraction(lo), Fraction(hi)
        except ValueError:
            raise SchemaError(f"line {lineno}: bad numeric bounds for {name!r}") from None
        if lo_q >= hi_q:
            raise SchemaError(f"line {lineno}: min must be below max for {name!r}")
        return FeatureDecl(name, "numeric", min=lo_q, max=hi_q, mutability=_flag(flag, lineno))
    raise SchemaError(f"line {lineno}: malformed feature declaration")


def _flag(flag: Optional[str], lineno: int) -> Mutability:
    if flag is None:
        return Mutability.FREE
    try:
        return _FLAGS[flag]
    except KeyError:
        raise SchemaError(f"line {lineno}: unknown mutability flag {flag!r}") from None


def format_schema(schema: Schema) -> str:
    lines = []
    for f in schema.features:
        flag = "" if f.mutability is Mutability.FREE else " " + f.mutability.value
        if f.numeric:
            lines.append(f"feature {f.name} numeric {_fmt_num(f.min)} {_fmt_num(f.max)}{flag}")
        else:
            vals = ", ".join(f"'{v}'" for v in f.values)
            lines.append(f"feature {f.name} categorical {{{vals}}}{flag}")
    lines.append(f"decision {schema.decision_predicate} undesired '{schema.undesired_value}'")
    return "\n".join(lines) + "\n"


# --- rule parsing -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|%[^\n]*)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<quoted>'[^'\n]*'|`[^'\n]*')
  | (?P<neck>:-)
  | (?P<leq>=<)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
  | (?P<punct>[(),.])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        if "\n" in chunk:
            line += chunk.count("\n")
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    return toks


# raw body items before numeric fusion
@dataclass
class _RawAtom:
    name: str
    arg: str  # symbol or variable name
    is_var: bool
    negated: bool
    tok: _Tok


@dataclass
class _RawCmp:
    var: str
    threshold: Fraction
    negated: bool
    tok: _Tok


@dataclass
class _RawClause:
    head: _RawAtom
    body: list


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, offset: int = 0) -> Optional[_Tok]:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def take(self, kind: str, text: Optional[str] = None) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else _Tok("", "", 1, 1)
            raise RuleSyntaxError(f"unexpected end of input, expected {text or kind}", last.line, last.col)
        if tok.kind != kind or (text is not None and tok.text != text):
            raise RuleSyntaxError(f"expected {text or kind}, found {tok.text!r}", tok.line, tok.col)
        self.i += 1
        return tok

    def clauses(self) -> list[_RawClause]:
        out = []
        while self.peek() is not None:
            out.append(self.clause())
        return out

    def clause(self) -> _RawClause:
        head = self.atom(negated=False)
        body: list = []
        tok = self.peek()
        if tok is not None and tok.kind == "neck":
            self.i += 1
            body.append(self.literal())
            while self.peek() is not None and self.peek().text == ",":
                self.i += 1
                body.append(self.literal())
        self.take("punct", ".")
        return _RawClause(head, body)

    def atom(self, negated: bool) -> _RawAtom:
        name = self.take("ident")
        self.take("punct", "(")
        self.take("var")
        self.take("punct", ",")
        tok = self.peek()
        if tok is None:
            raise RuleSyntaxError("unexpected end of input in atom", name.line, name.col)
        if tok.kind == "quoted":
            arg, is_var = _unquote(tok.text), False
        elif tok.kind == "ident":
            arg, is_var = tok.text, False
        elif tok.kind == "var":
            arg, is_var = tok.text, True
        else:
            raise RuleSyntaxError(f"expected a value or variable, found {tok.text!r}", tok.line, tok.col)
        self.i += 1
        self.take("punct", ")")
        return _RawAtom(name.text, arg, is_var, negated, name)

    def cmp(self, negated: bool, start: _Tok) -> _RawCmp:
        var = self.take("var")
        self.take("leq")
        num = self.take("number")
        return _RawCmp(var.text, Fraction(num.text), negated, start)

    def literal(self):
        tok = self.peek()
        if tok is None:
            raise RuleSyntaxError("unexpected end of input in rule body")
        if tok.kind == "ident" and tok.text == "not":
            nxt = self.peek(1)
            if nxt is not None and nxt.text == "(":
                self.i += 2
                c = self.cmp(negated=True, start=tok)
                self.take("punct", ")")
                return c
            self.i += 1
            a = self.atom(negated=True)
            if a.is_var:
                raise RuleSyntaxError("negated numeric binding is not supported", tok.line, tok.col)
            return a
        if tok.kind == "var":
            return self.cmp(negated=False, start=tok)
        return self.atom(negated=False)


def parse_program(text: str, schema: Schema) -> RuleSet:
    """Parse rule source into a validated RuleSet classified against ``schema``."""
    raw = _Parser(text).clauses()
    heads = {c.head.name for c in raw}
    rules = [_build_rule(c, schema, heads) for c in raw]
    return RuleSet(tuple(rules))


def _build_rule(clause: _RawClause, schema: Schema, heads: set[str]) -> Rule:
    h = clause.head
    if h.name == schema.decision_predicate:
        kind = RuleKind.DECISION
    elif h.name in schema:
        kind = RuleKind.CAUSAL
    else:
        kind = RuleKind.AUXILIARY

    bound: dict[str, tuple[str, _Tok]] = {}  # numeric var -> feature
    used: set[str] = set()
    head_var = h.arg if h.is_var else None
    head_lo: Optional[Fraction] = None
    head_hi: Optional[Fraction] = None
    body: list[Literal] = []

    if head_var is not None:
        if kind is not RuleKind.CAUSAL or not schema.feature(h.name).numeric:
            raise RuleSyntaxError(f"head {h.name!r} cannot bind a numeric variable", h.tok.line, h.tok.col)
    elif kind is RuleKind.CAUSAL:
        _check_value(schema.feature(h.name), h.arg, h.tok)

    for item in clause.body:
        if isinstance(item, _RawCmp):
            if item.var == head_var:
                if item.negated:
                    head_lo = item.threshold if head_lo is None else max(head_lo, item.threshold)
                else:
                    head_hi = item.threshold if head_hi is None else min(head_hi, item.threshold)
                continue
            if item.var not in bound:
                raise RuleSyntaxError(f"comparison on unbound variable {item.var}", item.tok.line, item.tok.col)
            feat = bound[item.var][0]
            used.add(item.var)
            atom = FeatureGt(feat, item.threshold) if item.negated else FeatureLeq(feat, item.threshold)
            body.append(Literal(atom))
            continue

        if item.name in schema:
            decl = schema.feature(item.name)
            if item.is_var:
                if not decl.numeric:
                    raise RuleSyntaxError(
                        f"comparison on categorical feature {item.name!r}", item.tok.line, item.tok.col
                    )
                if item.arg == head_var or item.arg in bound:
                    raise RuleSyntaxError(f"variable {item.arg} bound twice", item.tok.line, item.tok.col)
                bound[item.arg] = (item.name, item.tok)
                continue
            _check_value(decl, item.arg, item.tok)
            body.append(Literal(FeatureEq(item.name, item.arg), item.negated))
        elif item.name in heads:
            if item.is_var:
                raise RuleSyntaxError(f"predicate {item.name!r} takes a value, not a variable", item.tok.line, item.tok.col)
            body.append(Literal(Defined(item.name, item.arg), item.negated))
        else:
            raise RuleSyntaxError(f"unknown feature or predicate {item.name!r}", item.tok.line, item.tok.col)

    for var, (feat, tok) in bound.items():
        if var not in used:
            raise RuleSyntaxError(f"numeric binding {feat}(X,{var}) has no comparison", tok.line, tok.col)

    value: HeadValue
    if head_var is not None:
        if head_lo is None and head_hi is None:
            raise RuleSyntaxError(f"head variable {head_var} is never constrained", h.tok.line, h.tok.col)
        value = NumericHead(head_lo, head_hi)
    else:
        value = h.arg
    return Rule(h.name, value, tuple(body), kind)


def _check_value(decl: FeatureDecl, value: str, tok: _Tok) -> None:
    if decl.numeric:
        raise RuleSyntaxError(f"numeric feature {decl.name!r} needs a numeric binding", tok.line, tok.col)
    if value not in decl.values:
        raise RuleSyntaxError(f"{value!r} is not a declared value of {decl.name!r}", tok.line, tok.col)


# --- stratification -----------------------------------------------------------


def dependency_graph(ruleset: RuleSet) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(ruleset.head_predicates)
    for r in ruleset.rules:
        for lit in r.body:
            if isinstance(lit.atom, Defined):
                q = lit.atom.predicate
                neg = lit.negated or (g.has_edge(q, r.head) and g.edges[q, r.head]["negative"])
                g.add_edge(q, r.head, negative=neg)
    return g


def validate_stratification(ruleset: RuleSet, schema: Schema) -> StratifiedProgram:
    """Order defined predicates so every NAF reference points to a lower stratum."""
    g = dependency_graph(ruleset)
    cond = nx.condensation(g)
    members = cond.graph["mapping"]  # node -> scc id
    for u, v, data in g.edges(data=True):
        if data["negative"] and members[u] == members[v]:
            back = nx.shortest_path(g, v, u) if u != v else [u]
            raise StratificationError(back + [v])

    level: dict[int, int] = {}
    for scc in nx.topological_sort(cond):
        lv = 0
        for pred_scc in cond.predecessors(scc):
            jump = any(
                g.edges[u, v]["negative"]
                for u in cond.nodes[pred_scc]["members"]
                for v in cond.nodes[scc]["members"]
                if g.has_edge(u, v)
            )
            lv = max(lv, level[pred_scc] + (1 if jump else 0))
        level[scc] = lv

    n = max(level.values(), default=-1) + 1
    strata = [set() for _ in range(n)]
    for node, scc in members.items():
        strata[level[scc]].add(node)
    return StratifiedProgram(schema, ruleset, tuple(frozenset(s) for s in strata))


def load_program(schema_text: str, rules_text: str) -> StratifiedProgram:
    schema = parse_schema(schema_text)
    return validate_stratification(parse_program(rules_text, schema), schema)


# --- pretty printing ------------------------------------------------------------


def _fmt_num(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    # exact decimal when the denominator allows it
    d = x.denominator
    k = 0
    while d % 2 == 0 or d % 5 == 0:
        d //= 2 if d % 2 == 0 else 5
        k += 1
    if d == 1:
        s = f"{x.numerator * 10**k // x.denominator}"
        neg = s.startswith("-")
        digits = s.lstrip("-").rjust(k + 1, "0")
        return ("-" if neg else "") + digits[:-k] + "." + digits[-k:]
    return f"{x.numerator}/{x.denominator}"


def format_rule(rule: Rule) -> str:
    parts: list[str] = []
    n = 0
    for lit in rule.body:
        a = lit.atom
        if isinstance(a, (FeatureLeq, FeatureGt)):
            n += 1
            var = f"N{n}"
            cmp = f"{var}=<{_fmt_num(a.threshold)}"
            parts.append(f"{a.feature}(X,{var})")
            parts.append(f"not({cmp})" if isinstance(a, FeatureGt) else cmp)
        else:
            name = a.feature if isinstance(a, FeatureEq) else a.predicate
            text = f"{name}(X,'{a.value}')"
            parts.append(("not " if lit.negated else "") + text)
    if isinstance(rule.value, NumericHead):
        head = f"{rule.head}(X,N)"
        if rule.value.lo is not None:
            parts.append(f"not(N=<{_fmt_num(rule.value.lo)})")
        if rule.value.hi is not None:
            parts.append(f"N=<{_fmt_num(rule.value.hi)}")
    else:
        head = f"{rule.head}(X,'{rule.value}')"
    if not parts:
        return head + "."
    return head + " :- " + ", ".join(parts) + "."


def format_program(ruleset: RuleSet | Iterable[Rule]) -> str:
    rules = ruleset.rules if isinstance(ruleset, RuleSet) else ruleset
    return "".join(format_rule(r) + "\n" for r in rules)


def head_label(value: HeadValue) -> str:
    if isinstance(value, NumericHead):
        lo = "-inf" if value.lo is None else _fmt_num(value.lo)
        hi = "+inf" if value.hi is None else _fmt_num(value.hi)
        return f"({lo}, {hi}]"
    return value


def format_number(x: Fraction) -> str:
    return _fmt_num(x)
