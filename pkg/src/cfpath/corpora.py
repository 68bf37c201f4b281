"""Bundled schemas, rule sets and instances, and instance-file reading."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources

from .abstraction import AbstractDomain, abstract_state, cellify
from .rules import StratifiedProgram, load_program

NAMES = ("example1", "example2", "german", "adult", "cars")


def read_instance(text: str) -> dict:
    """Parse a header-bearing comma-separated file holding exactly one record."""
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if len(rows) != 2:
        raise ValueError(f"instance file must hold a header and one record, found {len(rows)} rows")
    header, record = rows
    if len(header) != len(record):
        raise ValueError("instance record length differs from header")
    return {h.strip(): v.strip() for h, v in zip(header, record)}


@dataclass
class Corpus:
    name: str
    schema_text: str
    rules_text: str
    instance: dict
    program: StratifiedProgram
    domain: AbstractDomain

    @property
    def initial(self) -> tuple:
        return abstract_state(self.instance, self.domain)


def data_text(filename: str) -> str:
    return resources.files("cfpath").joinpath("data", filename).read_text(encoding="utf-8")


def load_corpus(name: str) -> Corpus:
    if name not in NAMES:
        raise KeyError(f"unknown corpus {name!r}; choose from {', '.join(NAMES)}")
    schema_text = data_text(f"{name}.schema")
    rules_text = data_text(f"{name}.rules")
    prog = load_program(schema_text, rules_text)
    dom = cellify(prog.schema, prog)
    return Corpus(name, schema_text, rules_text, read_instance(data_text(f"{name}.csv")), prog, dom)
