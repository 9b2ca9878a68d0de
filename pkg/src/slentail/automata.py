"""Bottom-up tree automata over normal tiles."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .slcore import eq_classes
from .tiles import Port, Tile, normalize_tile


@dataclass(frozen=True)
class Transition:
    tile: Tile
    lhs: tuple
    rhs: str

    def __str__(self):
        return f"{self.tile}({', '.join(self.lhs)}) -> {self.rhs}"


@dataclass
class TreeAutomaton:
    transitions: set = field(default_factory=set)
    finals: set = field(default_factory=set)
    extra_states: set = field(default_factory=set)

    @property
    def states(self):
        out = set(self.finals) | set(self.extra_states)
        for t in self.transitions:
            out.add(t.rhs)
            out.update(t.lhs)
        return out

    @property
    def alphabet(self):
        return {t.tile for t in self.transitions}

    def size(self):
        return sum(len(t.lhs) + 1 for t in self.transitions)

    def counts(self):
        return len(self.states), len(self.transitions)

    def by_symbol(self):
        idx = {}
        for t in self.transitions:
            idx.setdefault(t.tile, []).append(t)
        return idx

    def sorted_transitions(self):
        return sorted(self.transitions, key=lambda t: (t.rhs, str(t.tile), t.lhs))

    def dump(self):
        lines = [f"states {len(self.states)} / finals {' '.join(sorted(self.finals))}"]
        lines += [str(t) for t in self.sorted_transitions()]
        return "\n".join(lines) + "\n"


def union(a, b):
    return TreeAutomaton(a.transitions | b.transitions, a.finals | b.finals,
                         a.extra_states | b.extra_states)


def reachable_states(a):
    reach, changed = set(), True
    while changed:
        changed = False
        for t in a.transitions:
            if t.rhs not in reach and all(q in reach for q in t.lhs):
                reach.add(t.rhs)
                changed = True
    return reach


def trim(a):
    """Keep states that are reachable bottom-up and lead to a final state."""
    reach = reachable_states(a)
    live = {t for t in a.transitions if t.rhs in reach and all(q in reach for q in t.lhs)}
    useful = set(a.finals) & reach
    changed = True
    while changed:
        changed = False
        for t in live:
            if t.rhs in useful:
                for q in t.lhs:
                    if q not in useful:
                        useful.add(q)
                        changed = True
    return TreeAutomaton({t for t in live if t.rhs in useful}, set(a.finals) & useful)


# ---------------------------------------------------------------- runs

def children_of(tree, p):
    n = 0
    while p + (n,) in tree:
        n += 1
    return n


def run_states(a, tree):
    """For every position, the set of states some run reaches there."""
    idx = a.by_symbol()
    out = {}
    for p in sorted(tree, key=len, reverse=True):
        k = children_of(tree, p)
        kids = [out[p + (i,)] for i in range(k)]
        out[p] = {t.rhs for t in idx.get(tree[p], ())
                  if len(t.lhs) == k and all(q in s for q, s in zip(t.lhs, kids))}
    return out


def membership(a, tree):
    """Return an accepting run (position -> state) or None."""
    reach = run_states(a, tree)
    idx = a.by_symbol()
    goal = sorted(reach[()] & a.finals)
    if not goal:
        return None
    run = {(): goal[0]}
    todo = [()]
    while todo:
        p = todo.pop()
        k = children_of(tree, p)
        for t in sorted(idx.get(tree[p], ()), key=str):
            if t.rhs == run[p] and len(t.lhs) == k and \
               all(q in reach[p + (i,)] for i, q in enumerate(t.lhs)):
                for i, q in enumerate(t.lhs):
                    run[p + (i,)] = q
                    todo.append(p + (i,))
                break
    return run


def accepts(a, tree):
    return membership(a, tree) is not None


def enumerate_trees(a, depth, limit=200000):
    """All trees of height <= depth accepted from each state: {state: [tree]}."""
    by_state = {q: [] for q in a.states}
    for _ in range(depth):
        new = {q: [] for q in a.states}
        for t in sorted(a.transitions, key=str):
            for combo in itertools.product(*(by_state[q] for q in t.lhs)):
                tree = {(): t.tile}
                for i, sub in enumerate(combo):
                    tree.update({(i,) + p: s for p, s in sub.items()})
                new[t.rhs].append(tree)
                if sum(map(len, new.values())) > limit:
                    raise OverflowError("tree enumeration limit")
        by_state = new
    return by_state


def language(a, depth):
    seen, out = set(), []
    trees = enumerate_trees(a, depth)
    for q in sorted(a.finals):
        for t in trees.get(q, []):
            key = tree_key(t)
            if key not in seen:
                seen.add(key)
                out.append(t)
    return out


def trees_by_size(a, max_nodes, limit=200000):
    """Accepted trees with at most `max_nodes` nodes, whatever their height."""
    by = {}                   # (state, n) -> trees with exactly n nodes
    for n in range(1, max_nodes + 1):
        for t in sorted(a.transitions, key=str):
            k = len(t.lhs)
            for sizes in _compositions(n - 1, k):
                pools = [by.get((q, m), ()) for q, m in zip(t.lhs, sizes)]
                for combo in itertools.product(*pools):
                    by.setdefault((t.rhs, n), []).append(_build(t.tile, combo))
                    if len(by[(t.rhs, n)]) > limit:
                        raise OverflowError("tree enumeration limit")
    seen, out = set(), []
    for (q, _), ts in sorted(by.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        if q in a.finals:
            for t in ts:
                key = tree_key(t)
                if key not in seen:
                    seen.add(key)
                    out.append(t)
    return out


def _compositions(total, parts):
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def tree_key(tree):
    return tuple(sorted(tree.items(), key=lambda kv: kv[0]))


# ---------------------------------------------------------------- sl2ta

def _sel_pos(rule, uf, v):
    for k, t in enumerate(rule.points_to[0].targets):
        if uf.find(t) == uf.find(v):
            return k
    return len(rule.points_to[0].targets)


def rule_tile(art, pred, rule):
    """The singleton tile of a one-points-to rule, ports split by signatures."""
    sigs = art.signatures
    uf = eq_classes(rule.pure, rule.all_vars())
    sel = lambda v: _sel_pos(rule, uf, v)

    def split(args, sig, sort):
        fw = [a for k, a in enumerate(args) if k in sig.fw]
        bw = [a for k, a in enumerate(args) if k in sig.bw]
        eq = tuple(a for k, a in enumerate(args) if k in sig.eq)
        if sort == "bw":
            bw.sort(key=sel)
        else:
            fw.sort(key=sel)
        return Port(tuple(fw), tuple(bw), eq)

    in_port = split(pred.formals, sigs[pred.name], "bw")
    outs = [split(c.args, sigs[c.pred], "fw") for c in rule.calls]
    order = sorted(range(len(outs)), key=lambda i: (sel(outs[i].fw[0]) if outs[i].fw else 10**6, i))
    ports = {v for p in [in_port] + outs for v in p.vars}
    ex = tuple(z for z in rule.existentials if z not in ports)
    phi = rule.with_(existentials=ex, calls=())
    tile = Tile(phi, in_port, tuple(outs[i] for i in order))
    return tile, order


def sl2ta(art):
    trans = set()
    for name, p in art.system.preds.items():
        for r in p.rules:
            tile, order = rule_tile(art, p, r)
            norm = normalize_tile(tile, art.parameters)
            trans.add(Transition(norm, tuple(r.calls[i].pred for i in order), name))
    return TreeAutomaton(trans, {art.root})


# ---------------------------------------------------------------- rotation closure

def _first_sel(tile, port):
    atom = tile.atom
    v = port.fw[0] if port.fw else None
    return atom.targets.index(v) if v in atom.targets else len(atom.targets)


def _insert_port(tile, port, outs, states, state):
    """Place `port` among `outs` by the selector of its first fw variable."""
    key = _first_sel(tile, port)
    pos = 0
    while pos < len(outs) and _first_sel(tile, outs[pos]) < key:
        pos += 1
    return outs[:pos] + (port,) + outs[pos:], states[:pos] + (state,) + states[pos:]


def rotation_closure(a, constants=(), rev_suffix="^rev", fin_prefix="qf"):
    """Close `a` under rotations of its accepted trees."""
    delta = a.sorted_transitions()
    out = set(a.transitions)
    finals = set(a.finals)
    norm = lambda t: normalize_tile(t, constants)
    rev = lambda q: q + rev_suffix

    def rotate_rule(q, visited):
        visited.add(q)
        for u in delta:
            for j, sj in enumerate(u.lhs):
                if sj != q:
                    continue
                tile = u.tile
                xj = tile.out_ports[j]
                outs = tile.out_ports[:j] + tile.out_ports[j + 1:]
                sts = u.lhs[:j] + u.lhs[j + 1:]
                if not len(tile.in_port) and u.rhs in a.finals:
                    t2 = Tile(tile.formula, xj.swap(), outs)
                    out.add(Transition(norm(t2), sts, rev(q)))
                elif tile.in_port.bw:
                    outs2, sts2 = _insert_port(tile, tile.in_port.swap(), outs, sts, rev(u.rhs))
                    t2 = Tile(tile.formula, xj.swap(), outs2)
                    out.add(Transition(norm(t2), sts2, rev(q)))
                    if u.rhs not in visited:
                        rotate_rule(u.rhs, visited)

    k = 0
    for rho in delta:
        tile = rho.tile
        if (len(tile.in_port) or rho.rhs not in a.finals) and tile.in_port.bw:
            qf = f"{fin_prefix}{k}"
            k += 1
            outs, sts = _insert_port(tile, tile.in_port.swap(), tile.out_ports, rho.lhs, rev(rho.rhs))
            out.add(Transition(norm(Tile(tile.formula, Port(), outs)), sts, qf))
            finals.add(qf)
            rotate_rule(rho.rhs, set())
    return TreeAutomaton(out, finals)


# ---------------------------------------------------------------- inclusion

def _build(tile, kids):
    tree = {(): tile}
    for i, sub in enumerate(kids):
        tree.update({(i,) + p: s for p, s in sub.items()})
    return tree


def _post(idx2, tile, sets):
    return frozenset(t.rhs for t in idx2.get(tile, ())
                     if len(t.lhs) == len(sets) and all(q in s for q, s in zip(t.lhs, sets)))


def inclusion(a1, a2):
    """L(a1) <= L(a2) by bottom-up antichains.  Returns (holds, counterexample)."""
    idx2 = a2.by_symbol()
    anti = {}                 # state of a1 -> list of (frozenset, tree)
    trans = sorted(a1.transitions, key=lambda t: (len(t.lhs), str(t.tile), t.lhs, t.rhs))

    def add(q, s, tree):
        lst = anti.setdefault(q, [])
        if any(old <= s for old, _ in lst):
            return False
        lst[:] = [(old, t) for old, t in lst if not s <= old] + [(s, tree)]
        return True

    changed = True
    while changed:
        changed = False
        for t in trans:
            pools = [list(anti.get(q, ())) for q in t.lhs]
            if any(not p for p in pools):
                continue
            for combo in itertools.product(*pools):
                s = _post(idx2, t.tile, [c[0] for c in combo])
                tree = _build(t.tile, [c[1] for c in combo])
                if add(t.rhs, s, tree):
                    changed = True
                    if t.rhs in a1.finals and not (s & a2.finals):
                        return False, tree
    return True, None


def determinize(a, alphabet):
    """Explicit subset construction: {(symbol, macro-children): macrostate}."""
    idx = a.by_symbol()
    arities = {}
    for t in a.transitions:
        arities.setdefault(t.tile, set()).add(len(t.lhs))
    macro, delta, changed = set(), {}, True
    while changed:
        changed = False
        for sym, k in sorted(alphabet, key=lambda sk: (sk[1], str(sk[0]))):
            for combo in itertools.product(sorted(macro, key=sorted), repeat=k):
                key = (sym, combo)
                if key in delta:
                    continue
                s = _post(idx, sym, combo)
                delta[key] = s
                if s not in macro:
                    macro.add(s)
                    changed = True
    return macro, delta


def naive_inclusion(a1, a2):
    """Determinize a2, then look for an a1-run landing on a rejecting macrostate."""
    alphabet = {(t.tile, len(t.lhs)) for t in a1.transitions}
    _, delta = determinize(a2, alphabet)
    pairs, trees, changed = set(), {}, True
    while changed:
        changed = False
        for t in sorted(a1.transitions, key=str):
            pools = [[(p, m) for p, m in pairs if p == q] for q in t.lhs]
            for combo in itertools.product(*pools):
                m = delta[(t.tile, tuple(c[1] for c in combo))]
                key = (t.rhs, m)
                if key not in pairs:
                    pairs.add(key)
                    trees[key] = _build(t.tile, [trees[c] for c in combo])
                    changed = True
    for q, m in sorted(pairs, key=str):
        if q in a1.finals and not (m & a2.finals):
            return False, trees[(q, m)]
    return True, None


def enumeration_inclusion(a1, a2, depth):
    for t in language(a1, depth):
        if not accepts(a2, t):
            return False, t
    return True, None
