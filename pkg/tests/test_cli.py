import json

import pytest

from cfpath.cli import EXIT_FAILURE, EXIT_INPUT, EXIT_MISMATCH, EXIT_OK, RunConfig, InputError, cmd_plan, main
from cfpath.corpora import data_text
from cfpath.planner import build_problem, find_path
from cfpath.report import parse_path_document, serialize_path


def _files(tmp_path, name):
    out = {}
    for ext in ("schema", "rules", "csv"):
        f = tmp_path / f"{name}.{ext}"
        f.write_text(data_text(f"{name}.{ext}"))
        out[ext] = str(f)
    return out


def test_plan_example1_table(tmp_path, capsys):
    f = _files(tmp_path, "example1")
    code = main(["plan", "--schema", f["schema"], "--rules", f["rules"], "--instance", f["csv"]])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    header = out.splitlines()[0]
    assert header.split(" | ")[0].strip() == "Features"
    assert "Goal State" in header and "Time (ms)" in header
    balance = next(l for l in out.splitlines() if l.startswith("bank_balance"))
    assert "Direct" in balance and "(60000, 1000000000]" in balance


def test_plan_json_round_trip(tmp_path, capsys, example2):
    code = main(["plan", "--corpus", "example2", "--format", "json"])
    text = capsys.readouterr().out
    assert code == EXIT_OK
    doc = parse_path_document(text)
    path = find_path(build_problem(example2.program, example2.initial, domain=example2.domain))
    assert doc.path == path
    again = serialize_path(doc.path, doc.domain, doc.schema_text, doc.rules_text, doc.instance, doc.time_ms)
    assert json.loads(again) == json.loads(text)


def test_check_accepts_planned_path(tmp_path, capsys):
    main(["plan", "--corpus", "german", "--format", "json", "--minimal"])
    doc = tmp_path / "path.json"
    doc.write_text(capsys.readouterr().out)
    assert main(["check", str(doc)]) == EXIT_OK
    assert "overall: pass" in capsys.readouterr().out


def test_check_rejects_tampered_path(tmp_path, capsys):
    main(["plan", "--corpus", "example1", "--format", "json"])
    data = json.loads(capsys.readouterr().out)
    data["states"] = data["states"][:1]
    data["steps"] = []
    doc = tmp_path / "path.json"
    doc.write_text(json.dumps(data))
    assert main(["check", str(doc), "--format", "json"]) == EXIT_FAILURE
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] is False and report["clauses"][1] is False


def test_check_rejects_fingerprint_mismatch(tmp_path, capsys):
    main(["plan", "--corpus", "example1", "--format", "json"])
    data = json.loads(capsys.readouterr().out)
    data["rules"] += "\n"
    doc = tmp_path / "path.json"
    doc.write_text(json.dumps(data))
    assert main(["check", str(doc)]) == EXIT_INPUT
    assert "fingerprint" in capsys.readouterr().err


def test_plan_rejects_inconsistent_initial_state(capsys):
    assert main(["plan", "--corpus", "adult"]) == EXIT_INPUT
    err = capsys.readouterr().err
    assert "not causally consistent" in err and "relationship" in err


def test_plan_initial_in_goal(capsys):
    assert main(["plan", "--corpus", "cars"]) == EXIT_OK
    captured = capsys.readouterr()
    assert "already" in captured.err
    assert "Goal State" in captured.out


def test_plan_failure_exit_code(tmp_path, capsys):
    (tmp_path / "s").write_text("feature a categorical {x, y} immutable\ndecision l undesired 'y'\n")
    (tmp_path / "r").write_text("l(X,'y') :- a(X,'x').\n")
    (tmp_path / "i").write_text("a\nx\n")
    code = main(["plan", "--schema", str(tmp_path / "s"), "--rules", str(tmp_path / "r"),
                 "--instance", str(tmp_path / "i")])
    out = capsys.readouterr().out
    assert code == EXIT_FAILURE
    assert "Failure" in out and "deepest trail" in out


def test_plan_reports_parse_errors(tmp_path, capsys):
    (tmp_path / "s").write_text("feature a categorical {x, y}\ndecision l undesired 'y'\n")
    (tmp_path / "r").write_text("l(X,'y') :- a(X,'x')\n")
    (tmp_path / "i").write_text("a\nx\n")
    code = main(["plan", "--schema", str(tmp_path / "s"), "--rules", str(tmp_path / "r"),
                 "--instance", str(tmp_path / "i")])
    assert code == EXIT_INPUT
    assert "line" in capsys.readouterr().err


def test_plan_reports_out_of_domain_instance(tmp_path, capsys):
    f = _files(tmp_path, "example1")
    (tmp_path / "bad.csv").write_text("age,debt,bank_balance,credit_score\n31,5000,40000,900\n")
    code = main(["plan", "--schema", f["schema"], "--rules", f["rules"], "--instance", str(tmp_path / "bad.csv")])
    assert code == EXIT_INPUT
    assert "credit_score" in capsys.readouterr().err


def test_missing_arguments(capsys):
    assert main(["plan", "--schema", "x"]) == EXIT_INPUT
    assert "--rules" in capsys.readouterr().err


def test_missing_file(capsys):
    assert main(["plan", "--schema", "/nonexistent", "--rules", "/nonexistent", "--instance", "/x"]) == EXIT_INPUT


def test_max_len_must_be_positive():
    with pytest.raises(InputError):
        RunConfig(max_len=0)


def test_enumerate_counts(capsys):
    assert main(["enumerate", "--corpus", "german", "--format", "json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == {"count": 240}
    assert main(["enumerate", "--corpus", "cars"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("counterfactual states: 78 of")


def test_enumerate_list(capsys):
    assert main(["enumerate", "--corpus", "example1", "--list", "--format", "json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["count"] == 1 and doc["states"][0]["bank_balance"] == "(60000, 1000000000]"


def test_repro_german_matches(capsys):
    assert main(["repro", "german"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "path     match" in out and "count    match: 240" in out


def test_repro_reports_mismatch(capsys):
    assert main(["repro", "cars"]) == EXIT_MISMATCH
    assert "MISMATCH" in capsys.readouterr().out


def test_repro_unknown_dataset(capsys):
    assert main(["repro", "iris"]) == EXIT_INPUT


def test_repro_random_sweep(capsys):
    assert main(["repro", "german", "--random", "5", "--seed", "7"]) == EXIT_OK
    assert "5 problems from seed 7, 0 mismatches" in capsys.readouterr().out


def test_cmd_plan_collects_output():
    lines, errs = [], []
    assert cmd_plan(RunConfig(corpus="example2"), lines.append, errs.append) == EXIT_OK
    assert errs == []
    assert "Intermediate" in lines[0]
