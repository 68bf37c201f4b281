"""Rendering of planned paths as tables and as a self-describing JSON document."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from .abstraction import AbstractDomain, abstract_state, cellify, value_label
from .planner import ActionSet, CandidatePath, DirectAction, Step, generate_actions
from .rules import load_program

FORMAT_TAG = "cfpath-path/1"


def fingerprint(schema_text: str, rules_text: str) -> str:
    h = hashlib.sha256()
    h.update(schema_text.encode())
    h.update(b"\0")
    h.update(rules_text.encode())
    return h.hexdigest()


@dataclass
class FeatureRow:
    feature: str
    values: list  # labels: initial, intermediates..., goal
    kinds: list  # one action kind per transition


@dataclass
class PathReport:
    rows: list
    time_ms: int
    notes: list = field(default_factory=list)

    @property
    def n_states(self) -> int:
        return len(self.rows[0].values) if self.rows else 0


def build_report(path: CandidatePath, dom: AbstractDomain, time_ms: int) -> PathReport:
    kinds_per_step = [path.feature_kinds(dom, i) for i in range(len(path.steps))]
    rows = []
    for k, name in enumerate(dom.names):
        rows.append(
            FeatureRow(
                name,
                [value_label(s[k]) for s in path.states],
                [kinds[name] for kinds in kinds_per_step],
            )
        )
    return PathReport(rows, time_ms)


def render_table(report: PathReport) -> str:
    n = report.n_states
    header = ["Features", "Initial State"]
    for i in range(1, n):
        header.append("Action")
        header.append("Goal State" if i == n - 1 else "Intermediate")
    if n == 1:
        header.append("Goal State")
    header.append("Time (ms)")
    table = [header]
    for j, row in enumerate(report.rows):
        cells = [row.feature, row.values[0]]
        for i in range(1, n):
            cells.append(row.kinds[i - 1])
            cells.append(row.values[i])
        if n == 1:
            cells.append(row.values[0])
        cells.append(str(report.time_ms) if j == 0 else "")
        table.append(cells)
    widths = [max(len(r[c]) for r in table) for c in range(len(header))]
    lines = []
    for idx, r in enumerate(table):
        lines.append(" | ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
        if idx == 0:
            lines.append("-+-".join("-" * w for w in widths))
    lines.extend(report.notes)
    return "\n".join(lines)


# --- structured document ------------------------------------------------------


def _action_json(a) -> dict:
    if isinstance(a, DirectAction):
        return {"kind": "Direct", "feature": a.feature, "value": value_label(a.value)}
    return {"kind": "Causal", "rule": a.rule_id, "feature": a.head_feature, "value": value_label(a.head_value)}


def serialize_path(
    path: CandidatePath,
    dom: AbstractDomain,
    schema_text: str,
    rules_text: str,
    instance: dict,
    time_ms: int = 0,
) -> str:
    doc = {
        "format": FORMAT_TAG,
        "fingerprint": fingerprint(schema_text, rules_text),
        "schema": schema_text,
        "rules": rules_text,
        "instance": {k: str(v) for k, v in instance.items()},
        "states": [dom.labels(s) for s in path.states],
        "steps": [
            {
                "actions": [_action_json(a) for a in step.actions],
                "through": [dom.labels(s) for s in step.through],
            }
            for step in path.steps
        ],
        "time_ms": time_ms,
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


class DocumentError(ValueError):
    pass


@dataclass
class PathDocument:
    schema_text: str
    rules_text: str
    instance: dict
    path: CandidatePath
    program: object
    domain: AbstractDomain
    initial: tuple
    time_ms: int = 0


def _state_from_labels(dom: AbstractDomain, labels: dict) -> tuple:
    if set(labels) != set(dom.names):
        raise DocumentError("state does not list exactly the schema features")
    return tuple(dom.parse_label(n, labels[n]) for n in dom.names)


def _action_from_json(d: dict, dom: AbstractDomain, actions: ActionSet):
    if d.get("kind") == "Direct":
        return DirectAction(d["feature"], dom.parse_label(d["feature"], d["value"]))
    if d.get("kind") == "Causal":
        for a in actions.causal:
            if a.rule_id == d["rule"]:
                return a
        raise DocumentError(f"no causal action for rule {d['rule']}")
    raise DocumentError(f"unknown action kind {d.get('kind')!r}")


def parse_path_document(text: str) -> PathDocument:
    """Inverse of ``serialize_path``; rebuilds program, domain and path."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"not a JSON document: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_TAG:
        raise DocumentError("not a path document")
    try:
        schema_text, rules_text = doc["schema"], doc["rules"]
        if fingerprint(schema_text, rules_text) != doc["fingerprint"]:
            raise DocumentError("fingerprint does not match the embedded schema and rules")
        prog = load_program(schema_text, rules_text)
        dom = cellify(prog.schema, prog)
        actions = generate_actions(prog.schema, dom, prog)
        states = [_state_from_labels(dom, s) for s in doc["states"]]
        steps = [
            Step(
                tuple(_action_from_json(a, dom, actions) for a in st["actions"]),
                tuple(_state_from_labels(dom, s) for s in st["through"]),
            )
            for st in doc["steps"]
        ]
        if len(steps) != max(len(states) - 1, 0):
            raise DocumentError("step count does not match state count")
        initial = abstract_state(doc["instance"], dom)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DocumentError):
            raise
        raise DocumentError(f"malformed path document: {exc}") from None
    return PathDocument(
        schema_text, rules_text, dict(doc["instance"]), CandidatePath(states, steps), prog, dom, initial,
        int(doc.get("time_ms", 0)),
    )


def describe_trail(states: list, dom: AbstractDomain, limit: Optional[int] = None) -> str:
    shown = states if limit is None else states[:limit]
    return "\n".join(
        f"  {i}: " + ", ".join(f"{n}={v}" for n, v in dom.labels(s).items()) for i, s in enumerate(shown)
    )

