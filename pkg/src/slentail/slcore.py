"""Syntax of symbolic heaps, heap states and the strict satisfaction relation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

NIL = "nil"
NULL = 0


class UnboundVariable(Exception):
    pass


class BoundExceeded(Exception):
    pass


class NoSpanningTree(Exception):
    pass


# ---------------------------------------------------------------- syntax

@dataclass(frozen=True)
class PointsTo:
    source: str
    targets: tuple

    def __post_init__(self):
        if self.source == NIL:
            raise ValueError("nil cannot be allocated")
        if not self.targets:
            raise ValueError("points-to needs at least one target")

    def vars(self):
        return (self.source,) + self.targets

    def rename(self, sub):
        return PointsTo(sub.get(self.source, self.source),
                        tuple(sub.get(v, v) for v in self.targets))

    def __str__(self):
        return f"{self.source} -> ({', '.join(self.targets)})"


@dataclass(frozen=True)
class Emp:
    def vars(self):
        return ()

    def rename(self, sub):
        return self

    def __str__(self):
        return "emp"


@dataclass(frozen=True)
class Call:
    pred: str
    args: tuple

    def vars(self):
        return self.args

    def rename(self, sub):
        return Call(self.pred, tuple(sub.get(v, v) for v in self.args))

    def __str__(self):
        return f"{self.pred}({', '.join(self.args)})"


@dataclass(frozen=True)
class Eq:
    lhs: str
    rhs: str

    def vars(self):
        return (self.lhs, self.rhs)

    def rename(self, sub):
        return Eq(sub.get(self.lhs, self.lhs), sub.get(self.rhs, self.rhs))

    def __str__(self):
        return f"{self.lhs} = {self.rhs}"


@dataclass(frozen=True)
class Formula:
    existentials: tuple = ()
    spatial: tuple = ()
    calls: tuple = ()
    pure: tuple = ()

    @property
    def points_to(self):
        return [a for a in self.spatial if isinstance(a, PointsTo)]

    def atoms(self):
        return self.spatial + self.calls + self.pure

    def all_vars(self):
        """Every variable occurrence in order of first appearance (nil excluded)."""
        seen = {}
        for a in self.atoms():
            for v in a.vars():
                if v != NIL:
                    seen.setdefault(v, None)
        return list(seen)

    def free_vars(self):
        bound = set(self.existentials)
        return [v for v in self.all_vars() if v not in bound]

    def rename(self, sub):
        """Substitute free and bound variables alike."""
        return Formula(tuple(sub.get(v, v) for v in self.existentials),
                       tuple(a.rename(sub) for a in self.spatial),
                       tuple(a.rename(sub) for a in self.calls),
                       tuple(a.rename(sub) for a in self.pure))

    def with_(self, **kw):
        return replace(self, **kw)

    def __str__(self):
        body = " * ".join(str(a) for a in self.spatial + self.calls) or "emp"
        if self.pure:
            body += " & " + " & ".join(str(e) for e in self.pure)
        if self.existentials:
            body = "\\E " + ", ".join(self.existentials) + ". " + body
        return body


def sep(*formulas, existentials=()):
    """Separating conjunction of formulas whose bound names are already apart."""
    out = Formula(tuple(existentials))
    for f in formulas:
        out = Formula(out.existentials + f.existentials,
                      tuple(a for a in out.spatial + f.spatial if not isinstance(a, Emp)),
                      out.calls + f.calls, out.pure + f.pure)
    return out


class UnionFind:
    def __init__(self, items=()):
        self.parent = {}
        for x in items:
            self.add(x)

    def add(self, x):
        self.parent.setdefault(x, x)

    def find(self, x):
        self.add(x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra
        return ra

    def classes(self):
        out = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return list(out.values())


def eq_classes(pure, extra=()):
    uf = UnionFind(extra)
    for e in pure:
        uf.union(e.lhs, e.rhs)
    return uf


# ---------------------------------------------------------------- states

@dataclass(frozen=True)
class State:
    """Store and heap.  Cells are tuples, selector k lives at index k-1."""
    store: dict = field(default_factory=dict)
    heap: dict = field(default_factory=dict)

    def __post_init__(self):
        if NULL in self.heap:
            raise ValueError("null cannot be allocated")
        if any(len(c) == 0 for c in self.heap.values()):
            raise ValueError("allocated cell without selectors")

    def value(self, v):
        if v == NIL:
            return NULL
        if v not in self.store:
            raise UnboundVariable(v)
        return self.store[v]

    def locations(self):
        locs = set(self.heap) | set(self.store.values())
        for cell in self.heap.values():
            locs.update(cell)
        locs.discard(NULL)
        return locs

    def edges(self):
        for src, cell in sorted(self.heap.items()):
            for k, dst in enumerate(cell, 1):
                yield src, k, dst

    def __hash__(self):
        return hash((tuple(sorted(self.store.items())), tuple(sorted(self.heap.items()))))

    def __str__(self):
        s = ", ".join(f"{v}={l}" for v, l in sorted(self.store.items()))
        h = ", ".join(f"{l}->({', '.join(map(str, c))})" for l, c in sorted(self.heap.items()))
        return f"store {{{s}}} heap {{{h}}}"


def disjoint_union(s1, s2):
    for v in s1.store.keys() & s2.store.keys():
        if s1.store[v] != s2.store[v]:
            return None
    if s1.heap.keys() & s2.heap.keys():
        return None
    return State({**s1.store, **s2.store}, {**s1.heap, **s2.heap})


def canonical_key(state, roots=None):
    """Isomorphism-invariant key: locations renumbered by a deterministic traversal."""
    order = {NULL: 0}

    def visit(loc):
        todo = [loc]
        while todo:
            l = todo.pop()
            if l in order:
                continue
            order[l] = len(order)
            todo.extend(reversed(state.heap.get(l, ())))

    for v in roots if roots is not None else sorted(state.store):
        visit(state.store[v])
    for l in sorted(state.heap):
        visit(l)
    store = tuple(sorted((v, order[l]) for v, l in state.store.items()))
    heap = tuple(sorted((order[l], tuple(order.get(x, -1) for x in c))
                        for l, c in state.heap.items()))
    return store, heap


def isomorphic(s1, s2):
    """Stores fix the traversal; garbage cells are compared by brute force."""
    if len(s1.heap) != len(s2.heap) or s1.store.keys() != s2.store.keys():
        return False
    if canonical_key(s1) == canonical_key(s2):
        return True
    if len(s1.heap) > 7:
        return False
    l1, l2 = sorted(s1.locations()), sorted(s2.locations())
    if len(l1) != len(l2):
        return False
    for perm in itertools.permutations(l2):
        m = dict(zip(l1, perm))
        m[NULL] = NULL
        if all(m[s1.store[v]] == s2.store[v] for v in s1.store) and \
           {m[l]: tuple(m[x] for x in c) for l, c in s1.heap.items()} == s2.heap:
            return True
    return False


# ---------------------------------------------------------------- semantics

def eval_formula(state, phi):
    """Strict semantics of a call-free formula on a state."""
    if phi.calls:
        raise ValueError("formula contains predicate calls")
    env = {}
    for v in phi.free_vars():
        env[v] = state.value(v)
    env[NIL] = NULL
    # a bound name shadows the store
    for z in phi.existentials:
        env.pop(z, None)
    atoms = phi.points_to
    if len(atoms) != len(state.heap):
        return False
    return _match(state, atoms, list(phi.pure), env, frozenset())


def _propagate(pure, env):
    changed = True
    while changed:
        changed = False
        for e in pure:
            a, b = env.get(e.lhs), env.get(e.rhs)
            if a is not None and b is not None:
                if a != b:
                    return False
            elif a is not None:
                env[e.rhs] = a
                changed = True
            elif b is not None:
                env[e.lhs] = b
                changed = True
    return True


def _bind_cell(state, atom, loc, env):
    cell = state.heap[loc]
    if len(cell) != len(atom.targets):
        return None
    env = dict(env)
    env[atom.source] = loc
    for v, l in zip(atom.targets, cell):
        if env.setdefault(v, l) != l:
            return None
    return env


def _match(state, atoms, pure, env, used):
    if not _propagate(pure, env):
        return False
    if not atoms:
        return True
    for i, a in enumerate(atoms):
        if a.source in env:
            loc = env[a.source]
            if loc not in state.heap or loc in used:
                return False
            env2 = _bind_cell(state, a, loc, env)
            return env2 is not None and _match(state, atoms[:i] + atoms[i + 1:], pure, env2, used | {loc})
    a, rest = atoms[0], atoms[1:]
    for loc in sorted(state.heap):
        if loc in used:
            continue
        env2 = _bind_cell(state, a, loc, env)
        if env2 is not None and _match(state, rest, pure, env2, used | {loc}):
            return True
    return False


# ---------------------------------------------------------------- trees

def parent(p):
    return p[:-1]


def spanning_trees(state, bound=10):
    """All spanning trees as dicts position -> location.

    Children of a node are numbered by the smallest selector reaching them.
    """
    cells = sorted(state.heap)
    if len(cells) > bound:
        raise BoundExceeded(f"{len(cells)} cells > {bound}")
    if not cells:
        return []
    preds = {c: sorted({src for src, _, dst in state.edges() if dst == c and src != c})
             for c in cells}
    out = []
    for root in cells:
        others = [c for c in cells if c != root]
        for choice in itertools.product(*(preds[c] for c in others)):
            par = dict(zip(others, choice))
            tree = _tree_of(state, root, par)
            if tree is not None:
                out.append(tree)
    out.sort(key=lambda t: sorted(t.items()))
    return out


def _tree_of(state, root, par):
    kids = {}
    for c, p in par.items():
        kids.setdefault(p, []).append(c)
    tree, todo = {(): root}, [((), root)]
    while todo:
        pos, loc = todo.pop()
        cell = state.heap[loc]
        ch = sorted(kids.get(loc, []), key=lambda c: cell.index(c))
        for i, c in enumerate(ch):
            tree[pos + (i,)] = c
            todo.append((pos + (i,), c))
    return tree if len(tree) == len(state.heap) else None


def edge_is_local(tree_inv, src, dst):
    p, q = tree_inv[src], tree_inv[dst]
    return p == q or q[:-1] == p or p[:-1] == q


def is_local_tree(state, tree):
    inv = {l: p for p, l in tree.items()}
    return all(edge_is_local(inv, s, d) for s, _, d in state.edges() if d in state.heap)


def is_local_state(state, bound=10):
    trees = spanning_trees(state, bound)
    if not trees:
        raise NoSpanningTree(str(state))
    return is_local_tree(state, trees[0])
