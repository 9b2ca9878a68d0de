import json

import pytest
from click.testing import CliRunner

from conftest import CORPUS, DLL, TABLE
from slentail.cli import main


@pytest.fixture
def run():
    runner = CliRunner()
    return lambda *args: runner.invoke(main, [str(a) for a in args])


def row(name):
    return CORPUS / f"{name}.sid"


def test_check_valid(run):
    r = run("check", row("row01_dll_dllrev"))
    assert r.exit_code == 0
    assert r.output.strip() == "verdict=Valid lhs=2/4 rhs=2/4 rot=5/8"


def test_check_invalid(run):
    r = run("check", row("row06_dll_split"))
    assert r.exit_code == 1
    assert r.output.startswith("verdict=Invalid ")


def test_check_unknown_prints_countermodel(run):
    r = run("check", row("row14_tll_unfolded"))
    assert r.exit_code == 2
    lines = r.output.splitlines()
    assert lines[0].startswith("verdict=Unknown ") and "oracle=CounterModel" in lines[0]
    assert lines[1] == "countermodel: store {a=1, c=1} heap {1->(0, 0, 0, 0)}"


def test_check_json(run):
    r = run("check", row("row08_dll_badprefix"), "--format", "json", "--oracle", "--timings")
    assert r.exit_code == 1
    d = json.loads(r.output)
    assert d["verdict"] == "Invalid"
    assert d["oracle"] == "CounterModel"
    assert d["sizes"] == {"lhs": "2/4", "rhs": "3/4", "rot": "8/10"}
    assert set(d["timings_us"]) == {"compile", "rotate", "inclusion", "oracle"}


def test_check_all(run):
    r = run("check", "--all", CORPUS)
    assert r.exit_code == 2
    lines = [l for l in r.output.splitlines() if l.startswith("file=")]
    assert [l.split()[0][5:-4] for l in lines] == [t[0] for t in TABLE]


def test_query_override(run, tmp_path):
    p = tmp_path / "dll.sid"
    p.write_text(DLL)
    r = run("check", p, "--lhs", "DLL(a, nil, c, nil)", "--rhs", r"\E b. a -> (b, nil) * DLL(b, a, c, nil)")
    assert r.exit_code == 1
    r = run("check", p, "--lhs", "DLL(a, nil, c, nil)")
    assert r.exit_code == 3 and "together" in r.output


def test_dump_stage(run):
    r = run("check", row("row01_dll_dllrev"), "--dump-stage", "sig")
    assert "DLL_tl_n fw={0} bw={1} eq={}" in r.output


def test_emit_ta(run):
    r = run("check", row("row01_dll_dllrev"), "--emit-ta")
    assert "# rotated rhs automaton\nstates 5 / finals" in r.output


def test_compile_and_rotate(run):
    lib = CORPUS / "lib.sid"
    r = run("compile", lib, "--pred", "DLL", "--args", "a,b,c,d", "--dump-stage", "elim")
    assert r.exit_code == 0
    assert r.output.startswith("DLL_hd_p_tl_n() ::= a -> (d, b) & a = c")
    assert "states 2 / finals DLL_hd_p_tl_n" in r.output
    r = run("rotate", lib, "--pred", "DLL", "--args", "a,b,c,d")
    assert r.output.startswith("states 5 / finals DLL_hd_p_tl_n qf0 qf1")
    r = run("compile", lib, "--pred", "DLL", "--args", "a,b")
    assert r.exit_code == 3 and "expects 4 arguments" in r.output


def test_validate(run, tmp_path):
    assert run("validate", CORPUS / "lib.sid").exit_code == 0
    bad = tmp_path / "disc.sid"
    bad.write_text("P(x, y) ::= x -> (nil) * y -> (nil);\n")
    r = run("validate", bad)
    assert r.exit_code == 3
    assert f"{bad}:1:13: DisconnectedRule:" in r.output


def test_syntax_error(run, tmp_path):
    bad = tmp_path / "bad.sid"
    bad.write_text("P(x) ::= x -> (nil) * ;\n")
    r = run("check", bad)
    assert r.exit_code == 3
    assert r.output.startswith(f"{bad}:1:23: ")


def test_missing_file(run):
    assert run("check", "nope.sid").exit_code == 3
