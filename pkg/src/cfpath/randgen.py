"""Seeded generator of small random planning problems for property suites.

Problems have at most four features with at most four values (or cells)
each, up to three causal and three decision rules, and an optional auxiliary
predicate used under negation, so every program is stratified by
construction.  Programs are produced as source text and parsed, which also
exercises the front end.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .abstraction import cellify, enumerate_states
from .evaluator import Evaluator
from .planner import CFGProblem, build_problem
from .rules import StratifiedProgram, load_program

MUTABILITY_WEIGHTS = (("", 8), ("immutable", 1), ("monotone", 2), ("causal_only", 1))


@dataclass
class RandomCase:
    seed: int
    schema_text: str
    rules_text: str
    program: StratifiedProgram
    problem: CFGProblem


def _feature_lines(rng: random.Random, n: int):
    feats = []
    for i in range(n):
        name = f"f{i}"
        flag = rng.choices([m for m, _ in MUTABILITY_WEIGHTS], [w for _, w in MUTABILITY_WEIGHTS])[0]
        if rng.random() < 0.3:
            thresholds = sorted(rng.sample(range(1, 10), rng.randint(1, 3)))
            feats.append((name, "numeric", thresholds, flag))
        else:
            values = [f"v{j}" for j in range(rng.randint(2, 4))]
            feats.append((name, "categorical", values, flag))
    return feats


def _literal(rng: random.Random, feat, var: str) -> str:
    name, kind, vals, _ = feat
    if kind == "numeric":
        t = rng.choice(vals)
        cmp = f"{var}=<{t}"
        return f"{name}(X,{var}), " + (f"not({cmp})" if rng.random() < 0.5 else cmp)
    text = f"{name}(X,'{rng.choice(vals)}')"
    return ("not " if rng.random() < 0.3 else "") + text


def _body(rng: random.Random, feats, exclude: str, max_lits: int = 2) -> list[str]:
    pool = [f for f in feats if f[0] != exclude]
    if not pool:
        return []
    chosen = rng.sample(pool, min(len(pool), rng.randint(1, max_lits)))
    return [_literal(rng, f, f"N{k}") for k, f in enumerate(chosen, start=1)]


def random_program_text(rng: random.Random) -> tuple[str, str]:
    feats = _feature_lines(rng, rng.randint(2, 4))
    schema_lines = []
    for name, kind, vals, flag in feats:
        suffix = f" {flag}" if flag else ""
        if kind == "numeric":
            schema_lines.append(f"feature {name} numeric 0 10{suffix}")
        else:
            schema_lines.append(f"feature {name} categorical {{{', '.join(vals)}}}{suffix}")
    schema_lines.append("decision label undesired 'bad'")

    rules = []
    for _ in range(rng.randint(1, 3)):
        head = rng.choice(feats)
        body = _body(rng, feats, head[0])
        if not body:
            continue
        name, kind, vals, _ = head
        if kind == "numeric":
            t = rng.choice(vals)
            region = f"not(H=<{t})" if rng.random() < 0.5 else f"H=<{t}"
            rules.append(f"{name}(X,H) :- {', '.join(body + [region])}.")
        else:
            rules.append(f"{name}(X,'{rng.choice(vals)}') :- {', '.join(body)}.")

    use_aux = rng.random() < 0.3
    if use_aux:
        rules.append(f"ab1(X,'True') :- {', '.join(_body(rng, feats, ''))}.")
    for k in range(rng.randint(1, 3)):
        body = _body(rng, feats, "", max_lits=3)
        if use_aux and k == 0:
            body.append("not ab1(X,'True')")
        rules.append(f"label(X,'bad') :- {', '.join(body)}.")
    return "\n".join(schema_lines) + "\n", "\n".join(rules) + "\n"


def random_case(seed: int, max_path_len=None, attempts: int = 50) -> RandomCase:
    """A random problem whose initial state is causally consistent and undesired.

    Seeds whose program admits no such state are re-drawn from the same
    generator stream, so a seed always maps to the same case.
    """
    rng = random.Random(seed)
    for _ in range(attempts):
        schema_text, rules_text = random_program_text(rng)
        prog = load_program(schema_text, rules_text)
        dom = cellify(prog.schema, prog)
        ev = Evaluator(prog, dom)
        starts = [s for s in enumerate_states(dom) if ev.is_causally_consistent(s) and ev.satisfies_decision(s)]
        if not starts:
            continue
        problem = build_problem(prog, rng.choice(starts), max_path_len, domain=dom)
        problem.evaluator = ev
        return RandomCase(seed, schema_text, rules_text, prog, problem)
    raise RuntimeError(f"seed {seed}: no usable problem in {attempts} draws")
