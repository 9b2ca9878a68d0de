"""Brute-force semantics used to cross-check the automata pipeline.

Everything here works on small bounded instances: unfolding trees of bounded
height, heaps with a bounded number of cells, and a direct model checker for
predicate atoms that splits heaps explicitly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

from .frontend import Query
from .preprocess import fresh
from .slcore import NIL, NULL, BoundExceeded, State, canonical_key, eq_classes
from .tiles import Port, Tile, char_formula


class Unsat(Exception):
    pass


@dataclass(frozen=True)
class OracleConfig:
    depth: int = 4
    cells: int = 8
    tree_limit: int = 100_000
    model_limit: int = 20_000


# ---------------------------------------------------------------- unfoldings

@dataclass(frozen=True)
class UnfoldingTree:
    pred: str
    labels: tuple            # sorted ((position, (pred, rule index)), ...)

    @property
    def nodes(self):
        return dict(self.labels)

    def height(self):
        return 1 + max(len(p) for p, _ in self.labels)

    def __len__(self):
        return len(self.labels)

    def __str__(self):
        return " ".join(f"{''.join(map(str, p)) or 'e'}:{q}.{k}" for p, (q, k) in self.labels)


def enumerate_unfoldings(sys, pred, max_depth, limit=100_000):
    """All unfolding trees of `pred` with height <= max_depth, in rule-index order."""
    depth = max(max_depth, 1)

    @lru_cache(maxsize=None)
    def trees(name, d):
        out = []
        for k, rule in enumerate(sys[name].rules):
            if rule.calls and d == 1:
                continue
            subs = [trees(c.pred, d - 1) for c in rule.calls]
            for combo in itertools.product(*subs):
                node = [((), (name, k))]
                for i, sub in enumerate(combo):
                    node += [((i,) + p, lab) for p, lab in sub]
                out.append(tuple(sorted(node)))
                if len(out) > limit:
                    raise BoundExceeded(f"more than {limit} unfoldings of {name}")
        return tuple(out)

    return [UnfoldingTree(pred, t) for t in trees(pred, depth)]


def rule_tile(pred, rule, actuals=None):
    """The tile of one rule: formals on the input port, call arguments on the outputs."""
    if actuals is None:
        return Tile(rule.with_(calls=()), Port(tuple(pred.formals)),
                    tuple(Port(c.args) for c in rule.calls))
    # keep bound names away from the actuals before substituting
    taken = set(actuals) | set(rule.all_vars())
    sub = {z: fresh(z, taken) for z in rule.existentials if z in actuals}
    sub.update(zip(pred.formals, actuals))
    rule = rule.rename(sub)
    return Tile(rule.with_(calls=()), Port(), tuple(Port(c.args) for c in rule.calls))


def system_params(sys):
    """Variables occurring free in rule bodies without being formals."""
    out = set()
    for p in sys.preds.values():
        for r in p.rules:
            out.update(v for v in r.free_vars() if v not in p.formals)
    return out - {NIL}


def tiled_tree(sys, tree, actuals):
    out = {}
    for p, (name, k) in tree.labels:
        pred = sys[name]
        out[p] = rule_tile(pred, pred.rules[k], actuals if p == () else None)
    return out


def characteristic(sys, tree, actuals):
    """The call-free formula described by an unfolding tree applied to `actuals`."""
    consts = set(actuals) | system_params(sys) | {NIL}
    return char_formula(tiled_tree(sys, tree, actuals), consts)


# ---------------------------------------------------------------- models

def formula_models(phi, store=None, cells=8, limit=20_000, merge=True):
    """Models of a call-free formula, one per way of merging dangling classes.

    With `store` given, free variables take those values; otherwise each free
    variable behaves like a dangling existential and the store is returned
    with the model.  Models are distinct up to renaming of locations.
    """
    if phi.calls:
        raise ValueError("formula still contains predicate atoms")
    uf = eq_classes(phi.pure, set(phi.all_vars()) | {NIL})
    reps = sorted({uf.find(v) for v in uf.parent})
    alloc = [uf.find(a.source) for a in phi.points_to]
    if len(set(alloc)) != len(alloc) or uf.find(NIL) in alloc:
        return []
    if len(alloc) > cells:
        raise BoundExceeded(f"{len(alloc)} cells needed, bound is {cells}")
    val = {uf.find(NIL): NULL}
    if store:
        for v, x in store.items():
            if v in uf.parent:
                r = uf.find(v)
                if val.get(r, x) != x:
                    return []
                val[r] = x
    taken = set(val.values())
    nxt = itertools.count(1)

    def fresh():
        while True:
            x = next(nxt)
            if x not in taken:
                taken.add(x)
                return x

    for r in alloc:
        if r not in val:
            val[r] = fresh()
        elif val[r] == NULL:
            return []
    if len({val[r] for r in alloc}) != len(alloc):
        return []
    dangling = [r for r in reps if r not in val]
    base = sorted(set(val.values()))
    free = sorted(phi.free_vars())
    out = []

    def emit(assign):
        v = {**val, **assign}
        heap = {v[uf.find(a.source)]: tuple(v[uf.find(t)] for t in a.targets)
                for a in phi.points_to}
        s = {x: v[uf.find(x)] for x in free}
        out.append(State(s, heap))
        if len(out) > limit:
            raise BoundExceeded(f"more than {limit} models")

    def go(i, assign, pool):
        if i == len(dangling):
            emit(assign)
            return
        if merge:
            for x in pool:
                go(i + 1, {**assign, dangling[i]: x}, pool)
        x = fresh()
        go(i + 1, {**assign, dangling[i]: x}, pool + [x])

    go(0, {}, list(base))
    return out


def model_of_tree(sys, tree, actuals, store=None, cells=8):
    """All models of one unfolding tree; raises Unsat when there is none."""
    phi = characteristic(sys, tree, actuals)
    models = formula_models(phi, store, cells)
    if not models:
        raise Unsat(str(tree))
    return models


def canonical_model(phi, store=None):
    """The model that keeps every dangling class apart."""
    models = formula_models(phi, store, cells=10**6, merge=False)
    if not models:
        raise Unsat(str(phi))
    return models[0]


# ---------------------------------------------------------------- model checking

class ModelChecker:
    """Decides S |= P(args) for the exact heap of S by explicit heap splitting."""

    def __init__(self, sys, state):
        self.sys = sys
        self.state = state
        self.heap = state.heap
        vals = set(state.store.values()) | set(self.heap) | {NULL}
        for c in self.heap.values():
            vals.update(c)
        self.domain = sorted(vals)
        self.outside = max(vals, default=0) + 1        # first unused location
        self.params = {v: state.store[v] for v in system_params(sys) if v in state.store}
        self.memo = {}

    def holds(self, pred, values, locs=None):
        locs = frozenset(self.heap) if locs is None else frozenset(locs)
        key = (pred, tuple(values), locs)
        if key not in self.memo:
            self.memo[key] = False
            p = self.sys[pred]
            env = {**self.params, **dict(zip(p.formals, values))}
            self.memo[key] = any(self._rule(r, env, locs) for r in p.rules)
        return self.memo[key]

    def _rule(self, rule, env, locs):
        env = dict(env)
        env[NIL] = NULL
        return any(self._calls(rule, e, locs - used)
                   for e, used in self._atoms(rule, rule.points_to, env, frozenset(), locs))

    def _atoms(self, rule, atoms, env, used, locs):
        if not atoms:
            yield env, used
            return
        a, rest = atoms[0], atoms[1:]
        cands = [env[a.source]] if a.source in env else sorted(locs - used)
        for loc in cands:
            if loc not in locs or loc in used:
                continue
            e = self._bind(env, a.source, loc)
            if e is None:
                continue
            cell = self.heap[loc]
            if len(cell) != len(a.targets):
                continue
            for t, x in zip(a.targets, cell):
                e = self._bind(e, t, x)
                if e is None:
                    break
            if e is not None:
                yield from self._atoms(rule, rest, e, used | {loc}, locs)

    @staticmethod
    def _bind(env, v, x):
        if v in env:
            return env if env[v] == x else None
        return {**env, v: x}

    def _pure(self, rule, env):
        """Extend env through the equalities; None on conflict."""
        changed = True
        while changed:
            changed = False
            for e in rule.pure:
                a, b = env.get(e.lhs), env.get(e.rhs)
                if a is not None and b is not None:
                    if a != b:
                        return None
                elif a is not None:
                    env = {**env, e.rhs: a}
                    changed = True
                elif b is not None:
                    env = {**env, e.lhs: b}
                    changed = True
        return env

    def _calls(self, rule, env, rest):
        env = self._pure(rule, env)
        if env is None:
            return False
        if not rule.calls:
            return not rest
        open_vars = sorted({v for c in rule.calls for v in c.args if v not in env})
        choices = self.domain + [self.outside + i for i in range(len(open_vars))]
        for vals in itertools.product(choices, repeat=len(open_vars)):
            e = {**env, **dict(zip(open_vars, vals))}
            if self._pure(rule, e) is None:
                continue
            if self._split(rule.calls, e, rest):
                return True
        return False

    def _split(self, calls, env, rest):
        c, more = calls[0], calls[1:]
        values = tuple(env[a] for a in c.args)
        if not more:
            return bool(rest) and self.holds(c.pred, values, rest)
        items = sorted(rest)
        for k in range(1, len(items) - len(more) + 1):
            for part in itertools.combinations(items, k):
                part = frozenset(part)
                if self.holds(c.pred, values, part) and self._split(more, env, rest - part):
                    return True
        return False


def satisfies(sys, state, call):
    values = tuple(state.value(a) for a in call.args)
    return ModelChecker(sys, state).holds(call.pred, values)


# ---------------------------------------------------------------- bounded entailment

@dataclass
class OracleResult:
    kind: str                       # Holds | CounterModel | Inconclusive
    model: State | None = None
    checked: int = 0
    skipped: int = 0
    notes: list = field(default_factory=list)

    def __str__(self):
        s = f"{self.kind} checked={self.checked} skipped={self.skipped}"
        if self.model is not None:
            s += f" model={self.model}"
        return s


HOLDS, COUNTERMODEL, INCONCLUSIVE = "Holds", "CounterModel", "Inconclusive"


def _rhs_store(state, rhs, params=()):
    """Bind right-hand variables the left side leaves open to unused locations."""
    store = dict(state.store)
    used = set(store.values()) | set(state.heap) | {y for c in state.heap.values() for y in c}
    nxt = max(used, default=0) + 1
    for a in sorted(set(rhs.args) | set(params)):
        if a != NIL and a not in store:
            store[a] = nxt
            nxt += 1
    return State(store, state.heap)


def bounded_entailment(sys, query: Query | None = None, depth=4, cells=8,
                       config: OracleConfig | None = None):
    """Check lhs |= rhs on every lhs model built from unfoldings up to the bounds."""
    cfg = config or OracleConfig(depth=depth, cells=cells)
    q = query or sys.query
    lhs, rhs = q.lhs, q.rhs
    res = OracleResult(HOLDS)
    params = system_params(sys)
    seen = set()
    for tree in enumerate_unfoldings(sys, lhs.pred, cfg.depth, cfg.tree_limit):
        try:
            models = formula_models(characteristic(sys, tree, lhs.args), None, cfg.cells,
                                    cfg.model_limit)
        except BoundExceeded:
            res.skipped += 1
            continue
        for s in models:
            key = canonical_key(s)
            if key in seen:
                continue
            seen.add(key)
            res.checked += 1
            if not satisfies(sys, _rhs_store(s, rhs, params), rhs):
                res.kind, res.model = COUNTERMODEL, s
                return res
    if not res.checked:
        res.kind = INCONCLUSIVE
    return res
