"""Reproduction harness for the published German, Adult and Cars results."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .abstraction import enumerate_counterfactuals, value_label
from .corpora import load_corpus
from .oracle import oracle_goal_set
from .planner import PlanningFailure, PreconditionError, build_problem, find_minimal_path, find_path

# feature -> (initial label, goal label, action kind)
EXPECTED_DELTAS = {
    "german": {"property": ("real estate", "car or other", "Direct")},
    "adult": {
        "relationship": ("Unmarried", "Husband", "Direct"),
        "marital_status": ("Never-married", "Married-civ-spouse", "Causal"),
        "capital_gain": ("(5013, 6849]", "(6849, 99999]", "Direct"),
    },
    "cars": {"maint": ("low", "med", "Direct")},
}
EXPECTED_COUNTS = {"german": 240, "adult": 112, "cars": 78}
PUBLISHED_MS = {"german": 3236, "adult": 1126, "cars": 1221}
DATASETS = ("german", "adult", "cars")


def plan(problem, minimal: bool, max_len: int):
    """Run the planner and time the search alone, in integer milliseconds."""
    start = time.perf_counter()
    if minimal:
        path = find_minimal_path(problem, cap=max_len)
    else:
        path = find_path(problem.with_bound(max_len))
    return path, int(round((time.perf_counter() - start) * 1000))


def path_deltas(path, dom) -> dict:
    """Net change per feature, with the kind of the last action that moved it."""
    out = {}
    first, last = path.states[0], path.states[-1]
    kinds = [path.feature_kinds(dom, i) for i in range(len(path.steps))]
    for k, name in enumerate(dom.names):
        if first[k] != last[k]:
            moved = [ks[name] for ks in kinds if ks[name] != "N/A"]
            out[name] = (value_label(first[k]), value_label(last[k]), moved[-1] if moved else "N/A")
    return out


@dataclass
class PathOutcome:
    dataset: str
    status: str  # path | failure | rejected
    deltas: dict = field(default_factory=dict)
    time_ms: int = 0
    message: str = ""

    @property
    def matches(self) -> bool:
        return self.status == "path" and self.deltas == EXPECTED_DELTAS[self.dataset]


@dataclass
class CountOutcome:
    dataset: str
    count: int
    oracle_equal: bool

    @property
    def matches(self) -> bool:
        return self.count == EXPECTED_COUNTS[self.dataset]


def reproduce_path(name: str, max_len: int = 10) -> PathOutcome:
    corpus = load_corpus(name)
    problem = build_problem(corpus.program, corpus.initial, domain=corpus.domain)
    try:
        path, ms = plan(problem, minimal=True, max_len=max_len)
    except PreconditionError as exc:
        return PathOutcome(name, "rejected", message=str(exc))
    except PlanningFailure as exc:
        return PathOutcome(name, "failure", message=str(exc))
    msg = "initial state already counterfactual" if len(path) == 1 else ""
    return PathOutcome(name, "path", path_deltas(path, corpus.domain), ms, msg)


def reproduce_count(name: str) -> CountOutcome:
    corpus = load_corpus(name)
    count, states = enumerate_counterfactuals(corpus.domain, corpus.program)
    return CountOutcome(name, count, set(states) == oracle_goal_set(corpus.domain, corpus.program))


def _fmt_deltas(deltas: dict) -> str:
    if not deltas:
        return "no change"
    return "; ".join(f"{f}: {a} -> {b} ({k})" for f, (a, b, k) in sorted(deltas.items()))


def run_repro(datasets=DATASETS, out=print, max_len: int = 10) -> bool:
    """Print actual against published values; True when everything matches."""
    ok = True
    for name in datasets:
        p = reproduce_path(name, max_len)
        c = reproduce_count(name)
        out(f"[{name}]")
        verdict = "match" if p.matches else "MISMATCH"
        if p.status == "path":
            actual = _fmt_deltas(p.deltas) + (f" ({p.message})" if p.message else "")
        else:
            actual = f"{p.status}: {p.message}"
        out(f"  path     {verdict}")
        out(f"    expected: {_fmt_deltas(EXPECTED_DELTAS[name])}")
        out(f"    actual:   {actual}")
        out(f"    time:     {p.time_ms} ms (published {PUBLISHED_MS[name]} ms, informational)")
        out(f"  count    {'match' if c.matches else 'MISMATCH'}: {c.count} (published {EXPECTED_COUNTS[name]})")
        out(f"  goal set {'equals' if c.oracle_equal else 'DIFFERS FROM'} brute-force reference")
        ok = ok and p.matches and c.matches and c.oracle_equal
    return ok


def random_sweep(seed: int, cases: int, out=print) -> bool:
    """Cross-check planner and evaluator against the oracle on random problems."""
    from .oracle import Oracle, Unreachable, oracle_shortest_path, verify_solution
    from .randgen import random_case

    bad = 0
    for k in range(cases):
        case = random_case(seed + k)
        p = case.problem
        o = Oracle(p.program, p.domain)
        _, states = enumerate_counterfactuals(p.domain, p.program, p.evaluator)
        if set(states) != oracle_goal_set(p.domain, p.program):
            bad += 1
            out(f"  seed {seed + k}: goal set mismatch")
        best = oracle_shortest_path(p, o)
        try:
            path = find_minimal_path(p, cap=p.domain.size())
        except PlanningFailure:
            if best is not Unreachable:
                bad += 1
                out(f"  seed {seed + k}: planner failed on a reachable goal")
            continue
        if best is Unreachable or len(path) != best.length or not verify_solution(path.states, p, o).ok:
            bad += 1
            out(f"  seed {seed + k}: path not a minimal solution")
    out(f"random sweep: {cases} problems from seed {seed}, {bad} mismatches")
    return bad == 0


__all__ = ["run_repro", "random_sweep", "reproduce_path", "reproduce_count", "plan", "path_deltas"]
