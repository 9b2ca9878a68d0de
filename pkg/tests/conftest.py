import csv
from pathlib import Path

import pytest

from slentail.automata import Transition, TreeAutomaton, sl2ta
from slentail.frontend import parse_system
from slentail.preprocess import run_pipeline

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"

DLL = r"""
DLL(hd, p, tl, n) ::= hd -> (n, p) & hd = tl
                    | \E x. hd -> (x, p) * DLL(x, hd, tl, n);
"""

TLL = r"""
TLL(root, ll, lr) ::= root -> (nil, nil, lr) & root = ll
                    | \E x, y, z. root -> (x, y, nil) * TLL(x, ll, z) * TLL(y, z, lr);
"""

TREE_PP = r"""
TREE_pp(x, b) ::= x -> (nil, nil, b)
                | \E l, r. x -> (l, r, b) * TREE_pp(l, x) * TREE_pp(r, x);
"""

def _read_table():
    """Rows of corpus/expected.tsv: file, answer, then (states, transitions) of
    the lhs automaton, the rhs automaton and the rotated rhs automaton."""
    pair = lambda s: tuple(map(int, s.split("/")))
    rows = []
    with open(CORPUS / "expected.tsv", newline="") as f:
        for r in csv.DictReader(f, delimiter="\t"):
            rows.append((r["query"], r["answer"] == "True", pair(r["lhs"]), pair(r["rhs"]),
                         pair(r["rot"])))
    return rows


TABLE = _read_table()
LOCAL_ROWS = 10


def load(name):
    return parse_system((CORPUS / f"{name}.sid").read_text())


@pytest.fixture
def dll():
    return parse_system(DLL)


@pytest.fixture(scope="session")
def corpus():
    return {row[0]: load(row[0]) for row in TABLE}


def _alphabet():
    """Tiles of the list and tree automata, grouped by arity."""
    lib = load("lib")
    by_arity = {}
    for pred, args in [("TREE_pp", ("a", "nil")), ("DLL", ("a", "nil", "c", "nil"))]:
        for t in sl2ta(run_pipeline(lib, pred, args)).transitions:
            by_arity.setdefault(t.tile.arity, set()).add(t.tile)
    return {k: sorted(v, key=str) for k, v in by_arity.items()}


ALPHABET = _alphabet()


def random_automaton(rng, n_states):
    states = [f"s{i}" for i in range(n_states)]
    trans = set()
    for arity, tiles in ALPHABET.items():
        for tile in tiles:
            for _ in range(rng.randint(0, 3)):
                lhs = tuple(rng.choice(states) for _ in range(arity))
                trans.add(Transition(tile, lhs, rng.choice(states)))
    return TreeAutomaton(trans, set(rng.sample(states, rng.randint(1, n_states))))
