import pytest

from conftest import CORPUS, DLL, TABLE
from slentail.frontend import (
    ArityMismatch, SidError, SidSyntaxError, UnknownPredicate, parse_formula, parse_system,
    print_system, rule_size, system_size, validate_system, with_query,
)
from slentail.slcore import Call, Eq, PointsTo


def kinds(text):
    return [d.kind for d in validate_system(parse_system(text))]


def test_parse_dll(dll):
    p = dll["DLL"]
    assert p.formals == ("hd", "p", "tl", "n")
    base, step = p.rules
    assert list(base.points_to) == [PointsTo("hd", ("n", "p"))]
    assert base.pure == (Eq("hd", "tl"),)
    assert step.existentials == ("x",)
    assert step.calls == (Call("DLL", ("x", "hd", "tl", "n")),)
    assert dll.query is None


def test_query_and_comments():
    sys = parse_system(DLL + "# a comment\nentail DLL(a, nil, c, nil) |- DLL(a, nil, c, nil);\n")
    assert sys.query.lhs == Call("DLL", ("a", "nil", "c", "nil"))
    assert sys.query.lhs == sys.query.rhs


def test_sizes():
    assert rule_size(parse_formula("a -> (b)")) == 2
    assert rule_size(parse_formula(r"\E x. a -> (x, b) * P(x, a) & a = c")) == 1 + 3 + 2 + 1
    assert rule_size(parse_formula("emp")) == 1
    assert system_size(parse_system(DLL)) == (3 + 1) + (1 + 3 + 4)


def test_empty_head():
    assert kinds("P(x) ::= emp;") == ["EmptyHead"]


def test_disconnected_rule():
    assert "DisconnectedRule" in kinds(r"P(x, y) ::= x -> (nil) * y -> (nil);")


def test_unbound_and_shadowing():
    assert "UnboundVariable" in kinds("P(x) ::= x -> (y);")
    assert "Shadowing" in kinds(r"P(x) ::= \E x. x -> (nil);")


def test_branching_propagation():
    text = r"""
    Q(u, v) ::= u -> (v);
    P(x, e) ::= \E y, z. x -> (y, z) * Q(y, e) * Q(z, e);
    """
    assert "BranchingPropagation" in kinds(text)


def test_unknown_predicate_and_arity():
    with pytest.raises(UnknownPredicate):
        parse_system("P(x) ::= x -> (nil) * R(x);")
    with pytest.raises(ArityMismatch):
        parse_system(r"P(x) ::= \E y. x -> (y) * P(y, x);")


def test_syntax_error_location():
    with pytest.raises(SidSyntaxError) as e:
        parse_system("P(x) ::= x -> (nil)\n  | x -> ();")
    assert isinstance(e.value, SidError)
    assert e.value.where("f.sid").startswith("f.sid:2:")
    with pytest.raises(SidSyntaxError) as e:
        parse_system("P(x) ::= x -> (nil) * ;")
    assert (e.value.line, e.value.col) == (1, 23)


def test_diagnostics_carry_rule_location():
    (d,) = validate_system(parse_system("Q(x) ::= x -> (nil);\nP(x) ::= x -> (nil)\n  | emp;"))
    assert (d.kind, d.pred, d.rule, d.line) == ("EmptyHead", "P", 1, 3)


@pytest.mark.parametrize("name", ["lib"] + [row[0] for row in TABLE])
def test_corpus_round_trip(name):
    text = (CORPUS / f"{name}.sid").read_text()
    sys = parse_system(text)
    assert validate_system(sys) == []
    again = parse_system(print_system(sys))
    assert again.preds == sys.preds
    assert again.query == sys.query


def test_query_sides_are_desugared():
    sys = parse_system((CORPUS / "row05_split_dll.sid").read_text())
    lhs = sys[sys.query.lhs.pred]
    assert lhs.name not in ("DLL", "DLL_rev")
    assert set(lhs.formals) == {"a", "c"}
    assert sys.query.rhs == Call("DLL", ("a", "nil", "c", "nil"))


def test_with_query(dll):
    sys = with_query(dll, "DLL(a, nil, c, nil)", r"\E b. a -> (b, nil) * DLL(b, a, c, nil)")
    assert sys.query.lhs == Call("DLL", ("a", "nil", "c", "nil"))
    assert sys.query.rhs.pred not in dll.preds
    assert dll.query is None and set(dll.preds) == {"DLL"}
