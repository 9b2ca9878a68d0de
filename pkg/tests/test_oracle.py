import pytest

from conftest import CORPUS, DLL, TREE_PP, load
from slentail.frontend import Query, parse_formula, parse_system, with_query
from slentail.oracle import (
    COUNTERMODEL, HOLDS, INCONCLUSIVE, ModelChecker, OracleConfig, Unsat, bounded_entailment,
    canonical_model, characteristic, enumerate_unfoldings, formula_models, model_of_tree,
    satisfies,
)
from slentail.slcore import BoundExceeded, Call, State, eval_formula, isomorphic

LIB = parse_system((CORPUS / "lib.sid").read_text())
LIST = ("a", "nil", "c", "nil")


def test_unfolding_counts(dll):
    assert [len(enumerate_unfoldings(dll, "DLL", d)) for d in (1, 2, 3, 4)] == [1, 2, 3, 4]
    tp = parse_system(TREE_PP)
    # t(d) = 1 + t(d-1)^2
    assert [len(enumerate_unfoldings(tp, "TREE_pp", d)) for d in (1, 2, 3)] == [1, 2, 5]


def test_unfolding_tree_shape(dll):
    (t,) = [t for t in enumerate_unfoldings(dll, "DLL", 3) if len(t) == 3]
    assert t.height() == 3
    assert str(t) == "e:DLL.1 0:DLL.1 00:DLL.0"


def test_unfolding_limit(dll):
    with pytest.raises(BoundExceeded):
        enumerate_unfoldings(parse_system(TREE_PP), "TREE_pp", 5, limit=10)


def test_models_satisfy_the_characteristic_formula(dll):
    for tree in enumerate_unfoldings(dll, "DLL", 4):
        phi = characteristic(dll, tree, LIST)
        models = formula_models(phi)
        assert models
        for s in models:
            assert eval_formula(s, phi)
            assert satisfies(dll, s, Call("DLL", LIST))


def test_dangling_classes_are_merged():
    phi = parse_formula(r"\E y, z. a -> (y, z)")
    models = formula_models(phi)
    # each of y, z is nil, a, or fresh; a fresh z may reuse a fresh y: 3 + 3 + 4
    shapes = {tuple(s.heap[s.store["a"]]) for s in models}
    assert len(models) == 10
    assert (0, 0) in shapes
    assert (1, 1) in shapes
    assert len(formula_models(phi, merge=False)) == 1


def test_unsatisfiable_formulas_have_no_model():
    assert formula_models(parse_formula("x -> (nil) * y -> (nil) & x = y")) == []
    assert formula_models(parse_formula("x -> (nil) & x = nil")) == []
    sys = parse_system("P(x) ::= x -> (nil) & x = nil;")
    (tree,) = enumerate_unfoldings(sys, "P", 1)
    with pytest.raises(Unsat):
        model_of_tree(sys, tree, ("a",))


def test_cell_bound(dll):
    big = max(enumerate_unfoldings(dll, "DLL", 5), key=len)
    with pytest.raises(BoundExceeded):
        formula_models(characteristic(dll, big, LIST), cells=4)


def test_model_checker(dll):
    s = State({"a": 1, "c": 3}, {1: (2, 0), 2: (3, 1), 3: (0, 2)})
    assert ModelChecker(dll, s).holds("DLL", (1, 0, 3, 0))
    assert not ModelChecker(dll, s).holds("DLL", (1, 0, 2, 0))
    broken = State({"a": 1, "c": 3}, {1: (2, 0), 2: (3, 2), 3: (0, 2)})
    assert not satisfies(dll, broken, Call("DLL", LIST))
    extra = State({"a": 1, "c": 1}, {1: (0, 0), 5: (0, 0)})
    assert not satisfies(dll, extra, Call("DLL", LIST))


def test_model_checker_on_trees():
    sys = parse_system(TREE_PP)
    s = State({"a": 1}, {1: (2, 3, 0), 2: (0, 0, 1), 3: (0, 0, 1)})
    assert satisfies(sys, s, Call("TREE_pp", ("a", "nil")))
    s = State({"a": 1}, {1: (2, 3, 0), 2: (0, 0, 1), 3: (0, 0, 2)})
    assert not satisfies(sys, s, Call("TREE_pp", ("a", "nil")))


@pytest.mark.parametrize("pred, args", [("DLL", LIST), ("TREE_pp", ("a", "nil")),
                                        ("DLL_rev", LIST), ("TREE_pp_rev", ("a", "nil"))])
def test_unfoldings_have_a_single_model_up_to_isomorphism(pred, args):
    for tree in enumerate_unfoldings(LIB, pred, 4):
        phi = characteristic(LIB, tree, args)
        models = formula_models(phi, cells=100)
        base = canonical_model(phi)
        assert all(isomorphic(base, m) for m in models)


def test_corpus_verdicts():
    assert bounded_entailment(load("row01_dll_dllrev")).kind == HOLDS
    res = bounded_entailment(load("row06_dll_split"))
    assert res.kind == COUNTERMODEL
    assert str(res.model) == "store {a=1, c=1} heap {1->(0, 0)}"


def test_entailment_into_itself(dll):
    sys = with_query(dll, "DLL(a, nil, c, nil)", "DLL(a, nil, c, nil)")
    res = bounded_entailment(sys, depth=4, cells=8)
    assert res.kind == HOLDS and res.checked == 4 and res.skipped == 0


def test_right_only_variables_get_fresh_locations(dll):
    sys = with_query(dll, "DLL(a, nil, c, nil)", "DLL(a, nil, e, nil)")
    assert bounded_entailment(sys, depth=2).kind == COUNTERMODEL


def test_everything_skipped_is_inconclusive(dll):
    sys = with_query(dll, "DLL(a, nil, c, nil)", "DLL(a, nil, c, nil)")
    res = bounded_entailment(sys, config=OracleConfig(depth=3, cells=0))
    assert res.kind == INCONCLUSIVE and res.skipped == 3


def test_explicit_query(dll):
    q = Query(Call("DLL", LIST), Call("DLL", LIST))
    assert bounded_entailment(parse_system(DLL), q, depth=2).kind == HOLDS
