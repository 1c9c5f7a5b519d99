import json
import os
import subprocess
import sys

import pytest

from conftest import FIXTURES
from subred.cli import main

FACT = str(FIXTURES / "factsqrt.sub")
LISTS = str(FIXTURES / "lists.sub")
APPEND = str(FIXTURES / "append.sub")
Q1 = "Fact(3,x), Sqrt(x,y)"
Q2 = "Sqrt(6,x), Fact(x,y)"


def cli(capsys, *args):
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


class TestCheck:
    def test_fixture(self, capsys):
        code, out, _ = cli(capsys, "check", FACT)
        assert code == 0
        assert out.splitlines()[-1] == "2 clauses nicely typed"
        assert out.splitlines()[0] == "7:1: clause Fact(3, 6): nicely typed {}"

    def test_transparency(self, capsys, tmp_path):
        f = tmp_path / "bad.sub"
        f.write_text("kind Int/0.\nfunc F : u -> Int.\n")
        code, _, err = cli(capsys, "check", str(f))
        assert code == 1 and "TransparencyViolation" in err and "2:1" in err

    def test_parse_error(self, capsys, tmp_path):
        f = tmp_path / "bad.sub"
        f.write_text("kind Int/0.\npred P : Int mode (in).\nP(x\n")
        code, _, err = cli(capsys, "check", str(f))
        assert code == 2 and "expected" in err

    def test_missing_file(self, capsys):
        assert cli(capsys, "check", "/nonexistent.sub")[0] == 2

    def test_usage(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_queries_and_certificates(self, capsys, tmp_path):
        f = tmp_path / "q.sub"
        f.write_text((FIXTURES / "factsqrt.sub").read_text() + f"?- {Q1}.\n?- {Q2}.\n")
        code, out, err = cli(capsys, "check", str(f), "--emit-cert")
        assert code == 1
        assert out.splitlines()[-1] == "2 clauses nicely typed, 1 of 2 queries nicely typed"
        assert "not principal" in err

    def test_json(self, capsys):
        code, out, _ = cli(capsys, "check", APPEND, "--json", "--emit-cert")
        doc = json.loads(out)
        assert code == 0 and doc["ok"]
        kinds = [r["kind"] for r in doc["results"]]
        assert kinds == ["clause"] * 4 + ["query"]
        assert all("certificate" in r for r in doc["results"])


class TestSolve:
    def test_trace(self, capsys):
        code, out, _ = cli(capsys, "solve", LISTS, "--term", "[x,[y]]", "--type", "Anylist", "--trace")
        assert code == 0
        assert "  u^x = Anylist" in out
        assert out.splitlines()[-1] == "principal typing: {x:Anylist, y:u^2.1}"

    def test_variable(self, capsys):
        code, out, _ = cli(capsys, "solve", LISTS, "--term", "x", "--type", "Anylist")
        assert code == 0 and out.splitlines()[-1] == "principal typing: {x:Anylist}"

    def test_no_solution(self, capsys):
        code, out, _ = cli(capsys, "solve", APPEND, "--term", "[]", "--type", "Int")
        assert code == 1
        assert out.splitlines()[-1].startswith("no solution: List(u^ε) <= Int")


class TestRun:
    def test_first_query(self, capsys):
        code, out, _ = cli(capsys, "run", FACT, "--query", Q1)
        assert code == 0 and out == "yes: x = 6, y = 2.449\n"

    def test_rejected(self, capsys):
        code, out, err = cli(capsys, "run", FACT, "--query", Q2)
        assert code == 1 and out == "rejected\n"
        assert "not principal for (6, x) against (Real, Real)" in err

    def test_unsafe(self, capsys):
        code, out, err = cli(capsys, "run", FACT, "--query", Q2, "--unsafe")
        assert code == 1 and out == "violation\n"
        assert "at resolvent Fact(2.449, y)" in err

    def test_failure(self, capsys):
        code, out, _ = cli(capsys, "run", FACT, "--query", "Fact(6,z)")
        assert code == 1 and out == "no\n"

    def test_strict(self, capsys):
        code, _, err = cli(capsys, "run", FACT, "--query", "Fact(w,z)", "--strict")
        assert code == 1 and "runtime mode error" in err

    def test_file_queries(self, capsys):
        code, out, _ = cli(capsys, "run", APPEND, "--trace")
        assert code == 0
        lines = out.splitlines()
        assert len(lines) == 4 and all("[certified]" in ln for ln in lines[:3])

    def test_json_records(self, capsys):
        code, out, _ = cli(capsys, "run", FACT, "--query", Q1, "--json")
        records = [json.loads(ln) for ln in out.splitlines()]
        assert code == 0
        steps, final = records[:-1], records[-1]
        assert [r["status"] for r in steps] == ["certified", "certified"]
        assert set(steps[0]) == {
            "clause", "depth", "detail", "resolvent", "selected", "status",
            "step", "theta1", "theta2", "typing",
        }
        assert final == {"answer": {"x": "6", "y": "2.449"}, "query": "Fact(3, x), Sqrt(x, y)", "status": "success", "steps": 2}
        # the records survive a round trip unchanged
        assert [json.loads(json.dumps(r)) for r in records] == records


def _run_subprocess(args, seed):
    env = dict(os.environ, SUBRED_SEED=str(seed))
    return subprocess.run(
        [sys.executable, "-m", "subred.cli", *args], capture_output=True, text=True, env=env
    )


def test_deterministic_output():
    args = ["run", APPEND, "--trace"]
    a, b = _run_subprocess(args, 5), _run_subprocess(args, 5)
    assert a.returncode == b.returncode == 0
    assert a.stdout == b.stdout


def test_seed_sets_fresh_names():
    a = _run_subprocess(["run", APPEND, "--trace"], 5).stdout
    b = _run_subprocess(["run", APPEND, "--trace"], 500).stdout
    assert a != b
    assert "_50" in b
