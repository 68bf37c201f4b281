"""Command-line interface: plan, enumerate, check and repro.

Exit codes: 0 success, 1 planner failure (or a path that fails
verification), 2 input error, 3 reproduction mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Optional

from .abstraction import abstract_state, cellify, enumerate_counterfactuals
from .corpora import NAMES, data_text, read_instance
from .evaluator import Evaluator, coverage_warnings
from .oracle import verify_solution
from .planner import CFGProblem, PlanningFailure, PreconditionError, build_problem
from .report import (
    DocumentError,
    build_report,
    describe_trail,
    parse_path_document,
    render_table,
    serialize_path,
)
from .repro import DATASETS, plan, random_sweep, run_repro
from .rules import RuleSyntaxError, SchemaError, StratificationError, head_label, load_program

EXIT_OK, EXIT_FAILURE, EXIT_INPUT, EXIT_MISMATCH = 0, 1, 2, 3
DEFAULT_MAX_LEN = 10


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    schema_path: Optional[str] = None
    rules_path: Optional[str] = None
    instance_path: Optional[str] = None
    corpus: Optional[str] = None
    max_len: int = DEFAULT_MAX_LEN
    minimal: bool = False
    fmt: str = "table"
    seed: int = 0
    listing: bool = False

    def __post_init__(self):
        if self.max_len < 1:
            raise InputError("--max-len must be at least 1")


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _sources(cfg: RunConfig, need_instance: bool):
    if cfg.corpus:
        schema_text = data_text(f"{cfg.corpus}.schema")
        rules_text = data_text(f"{cfg.corpus}.rules")
        instance_text = data_text(f"{cfg.corpus}.csv")
    else:
        missing = [f for f, v in (("--schema", cfg.schema_path), ("--rules", cfg.rules_path)) if not v]
        if need_instance and not cfg.instance_path:
            missing.append("--instance")
        if missing:
            raise InputError("missing " + ", ".join(missing) + " (or use --corpus)")
        schema_text, rules_text = _read(cfg.schema_path), _read(cfg.rules_path)
        instance_text = _read(cfg.instance_path) if need_instance else None
    try:
        prog = load_program(schema_text, rules_text)
        dom = cellify(prog.schema, prog)
        instance = read_instance(instance_text) if instance_text is not None else None
    except (RuleSyntaxError, SchemaError, StratificationError, ValueError) as exc:
        raise InputError(str(exc)) from None
    return schema_text, rules_text, prog, dom, instance


def cmd_plan(cfg: RunConfig, out=print, err=None) -> int:
    err = err or (lambda m: print(m, file=sys.stderr))
    schema_text, rules_text, prog, dom, instance = _sources(cfg, need_instance=True)
    for w in coverage_warnings(prog, dom):
        err(f"warning: {w}")
    try:
        initial = abstract_state(instance, dom)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    problem = build_problem(prog, initial, domain=dom)
    ev = problem.evaluator
    if not ev.is_causally_consistent(initial):
        broken = ", ".join(f"{f} in {head_label(h)}" for f, h in ev.violations(initial))
        err(f"error: initial state is not causally consistent (violated: {broken})")
        return EXIT_INPUT
    if not ev.satisfies_decision(initial):
        err("notice: the initial state already has the desired outcome; the path is trivial")
    try:
        path, ms = plan(problem, cfg.minimal, cfg.max_len)
    except PreconditionError as exc:
        err(f"error: {exc}")
        return EXIT_INPUT
    except PlanningFailure as exc:
        if cfg.fmt == "json":
            out(json.dumps({"status": "failure", "reason": exc.reason, "bound": exc.bound,
                            "deepest_trail": [dom.labels(s) for s in exc.deepest_trail]}, indent=2))
        else:
            out(f"Failure: {exc}")
            out("deepest trail reached:")
            out(describe_trail(exc.deepest_trail, dom))
        return EXIT_FAILURE
    if cfg.fmt == "json":
        out(serialize_path(path, dom, schema_text, rules_text, instance, ms).rstrip("\n"))
    else:
        out(render_table(build_report(path, dom, ms)))
    return EXIT_OK


def cmd_enumerate(cfg: RunConfig, out=print) -> int:
    _, _, prog, dom, _ = _sources(cfg, need_instance=False)
    count, states = enumerate_counterfactuals(dom, prog)
    if cfg.fmt == "json":
        doc = {"count": count}
        if cfg.listing:
            doc["states"] = [dom.labels(s) for s in states]
        out(json.dumps(doc, indent=2, ensure_ascii=False))
        return EXIT_OK
    out(f"counterfactual states: {count} of {dom.size()}")
    if cfg.listing:
        out(describe_trail(states, dom))
    return EXIT_OK


def cmd_check(path_file: str, fmt: str = "table", out=print) -> int:
    try:
        doc = parse_path_document(_read(path_file))
    except DocumentError as exc:
        raise InputError(str(exc)) from None
    ev = Evaluator(doc.program, doc.domain)
    problem = CFGProblem(doc.program.schema, doc.program, doc.domain, doc.initial,
                         build_problem(doc.program, doc.initial, domain=doc.domain).actions, None, ev)
    report = verify_solution(doc.path.states, problem)
    if fmt == "json":
        out(json.dumps({"ok": report.ok, "clauses": report.passed,
                        "witnesses": [None if w is None else repr(w) for w in report.witnesses]}, indent=2))
    else:
        out(report.render(doc.domain))
    return EXIT_OK if report.ok else EXIT_FAILURE


def cmd_repro(datasets=DATASETS, max_len: int = DEFAULT_MAX_LEN, seed: int = 0, random_cases: int = 0,
              out=print) -> int:
    ok = run_repro(datasets, out=out, max_len=max_len)
    if random_cases:
        ok = random_sweep(seed, random_cases, out=out) and ok
    out("all results match" if ok else "some results differ from the published values")
    return EXIT_OK if ok else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfpath", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def sources(p, instance: bool):
        p.add_argument("--schema", help="schema file")
        p.add_argument("--rules", help="rule file")
        if instance:
            p.add_argument("--instance", help="single-record CSV file with a header row")
        p.add_argument("--corpus", choices=NAMES, help="use a bundled corpus instead of files")

    p = sub.add_parser("plan", help="find a counterfactual path for one instance")
    sources(p, instance=True)
    p.add_argument("--max-len", type=int, default=DEFAULT_MAX_LEN,
                   help="maximum number of consistent states in the path (default %(default)s)")
    p.add_argument("--minimal", action="store_true", help="search for a shortest path")
    p.add_argument("--format", choices=("table", "json"), default="table")

    p = sub.add_parser("enumerate", help="count causally consistent counterfactual states")
    sources(p, instance=False)
    p.add_argument("--list", action="store_true", help="print every counterfactual state")
    p.add_argument("--format", choices=("table", "json"), default="table")

    p = sub.add_parser("check", help="verify a path document written by plan --format json")
    p.add_argument("path_file")
    p.add_argument("--format", choices=("table", "json"), default="table")

    p = sub.add_parser("repro", help="compare bundled corpora against the published results")
    p.add_argument("datasets", nargs="*", metavar="DATASET", help="subset of german, adult, cars (default: all)")
    p.add_argument("--max-len", type=int, default=DEFAULT_MAX_LEN)
    p.add_argument("--seed", type=int, default=0, help="first seed of the random sweep")
    p.add_argument("--random", type=int, default=0, metavar="N",
                   help="also cross-check N random problems against the brute-force reference")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plan":
            cfg = RunConfig(args.schema, args.rules, args.instance, args.corpus, args.max_len,
                            args.minimal, args.format)
            return cmd_plan(cfg)
        if args.command == "enumerate":
            cfg = RunConfig(args.schema, args.rules, None, args.corpus, fmt=args.format, listing=args.list)
            return cmd_enumerate(cfg)
        if args.command == "check":
            return cmd_check(args.path_file, args.format)
        unknown = [d for d in args.datasets if d not in DATASETS]
        if unknown:
            raise InputError(f"unknown dataset(s): {', '.join(unknown)}")
        if args.max_len < 1:
            raise InputError("--max-len must be at least 1")
        return cmd_repro(tuple(args.datasets) or DATASETS, args.max_len, args.seed, args.random)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
