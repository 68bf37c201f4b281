import functools

import pytest

from cfpath.corpora import load_corpus
from cfpath.rules import load_program
from cfpath.abstraction import cellify


@functools.lru_cache(maxsize=None)
def corpus(name):
    return load_corpus(name)


@pytest.fixture
def example1():
    return corpus("example1")


@pytest.fixture
def example2():
    return corpus("example2")


@pytest.fixture
def german():
    return corpus("german")


@pytest.fixture
def adult():
    return corpus("adult")


@pytest.fixture
def cars():
    return corpus("cars")


def program(schema_text, rules_text=""):
    prog = load_program(schema_text, rules_text)
    return prog, cellify(prog.schema, prog)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
