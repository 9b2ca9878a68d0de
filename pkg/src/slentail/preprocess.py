"""Canonization: equality elimination, splitting, cleanup, parameter
elimination and fw/bw/eq signatures."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .frontend import InductiveSystem, Predicate, allocated, root_indices, rule_roots
from .slcore import NIL, Call, Eq, Formula, eq_classes


class PipelineError(Exception):
    kind = "PipelineError"


class UnsatRule(PipelineError):
    kind = "UnsatRule"


class EmptyRule(PipelineError):
    kind = "EmptyRule"


class DisconnectedRule(PipelineError):
    kind = "DisconnectedRule"


class BranchingPropagation(PipelineError):
    kind = "BranchingPropagation"


def fresh(base, taken):
    name = base
    while name in taken:
        name += "'"
    taken.add(name)
    return name


def targets(rule):
    return [t for a in rule.points_to for t in a.targets]


# ---------------------------------------------------------------- equalities

def eliminate_equalities(sys):
    preds = {}
    for name, p in sys.preds.items():
        preds[name] = replace(p, rules=tuple(_elim_eq_rule(p, r) for r in p.rules))
    return sys.copy(preds)


def _elim_eq_rule(pred, rule):
    alloc = set(allocated(rule))
    uf = eq_classes(rule.pure, rule.all_vars())
    order = list(pred.formals) + list(rule.existentials)
    sub, pure = {}, []
    for cls in uf.classes():
        cls = sorted(cls, key=lambda v: order.index(v) if v in order else -1)
        if sum(v in alloc for v in cls) > 1 or (NIL in cls and alloc & set(cls)):
            raise UnsatRule(f"{pred.name}: {' = '.join(cls)} equates allocated cells")
        formals = [v for v in cls if v in pred.formals]
        if NIL in cls:
            rep = NIL
        elif formals:
            rep = next((v for v in formals if v in alloc), formals[0])
        else:
            rep = cls[0]
        for v in cls:
            if v not in pred.formals and v != rep:
                sub[v] = rep
        pure += [Eq(rep, v) for v in formals if v != rep]
    out = replace(rule, pure=()).rename(sub)
    used = set(out.all_vars())
    ex = tuple(z for z in rule.existentials if z in used and z not in sub)
    return replace(out, existentials=ex, pure=tuple(pure))


# ---------------------------------------------------------------- splitting

def split_system(sys, protect=()):
    """One points-to per rule; new predicates follow a DFS spanning tree of each head."""
    preds = dict(sys.preds)
    for name, p in sys.preds.items():
        rules = []
        for j, r in enumerate(p.rules):
            if not r.points_to:
                raise EmptyRule(f"rule {j + 1} of {name} has no points-to")
            if len(r.points_to) == 1:
                rules.append(r)
                continue
            rules.append(_split_rule(sys, p, j, r, preds))
        preds[name] = replace(p, rules=tuple(rules))
    return cleanup(sys.copy(preds), protect=protect)


def _dfs_positions(rule, root):
    uf = eq_classes(rule.pure, rule.all_vars())
    by_src = {uf.find(a.source): a for a in rule.points_to}
    pos_of = {}

    def visit(atom, pos):
        pos_of[pos] = atom
        seen.add(id(atom))
        d = 0
        for t in atom.targets:
            child = by_src.get(uf.find(t)) if t != NIL else None
            if child is not None and id(child) not in seen:
                visit(child, pos + (d,))
                d += 1

    seen = set()
    start = by_src.get(uf.find(root))
    if start is None:
        return None, uf
    visit(start, ())
    if len(pos_of) != len(rule.points_to):
        return None, uf
    return pos_of, uf


def _place_call(sys, call, pos_of, uf):
    roots = root_indices(sys[call.pred])
    key_args = {uf.find(call.args[s]) for s in roots if call.args[s] != NIL}
    all_args = {uf.find(v) for v in call.args if v != NIL}
    best = [p for p, a in pos_of.items() if key_args & {uf.find(t) for t in a.targets}]
    loose = [p for p, a in pos_of.items() if all_args & {uf.find(t) for t in a.targets}]
    cand = best or loose
    return min(cand) if cand else None


def _split_rule(sys, p, j, r, preds):
    for root in rule_roots(sys, p, r) or list(p.formals) + list(r.existentials):
        pos_of, uf = _dfs_positions(r, root)
        if pos_of is not None:
            break
    else:
        raise DisconnectedRule(f"rule {j + 1} of {p.name}: head is not a tree")
    placed = {}
    for c in r.calls:
        where = _place_call(sys, c, pos_of, uf)
        if where is None:
            raise DisconnectedRule(f"rule {j + 1} of {p.name}: cannot place {c}")
        placed.setdefault(where, []).append(c)
    params = tuple(p.formals) + tuple(r.existentials)
    names = {}
    for pos in sorted(pos_of):
        if pos:
            base = f"{p.name}_r{j + 1}p{''.join(map(str, pos))}"
            names[pos] = fresh(base, set(preds) | set(names.values()))
    alloc_of = {}
    for e in r.pure:
        alloc_of.setdefault(e.lhs, []).append(e)
    new_rules = {}
    for pos, atom in pos_of.items():
        kids = sorted(q for q in pos_of if len(q) == len(pos) + 1 and q[:-1] == pos)
        calls = tuple(Call(names[q], params) for q in kids) + tuple(placed.get(pos, ()))
        pure = tuple(e for e in r.pure if uf.find(e.lhs) == uf.find(atom.source))
        new_rules[pos] = Formula((), (atom,), calls, pure)
    for pos, name in names.items():
        preds[name] = Predicate(name, params, (new_rules[pos],))
    return replace(new_rules[()], existentials=r.existentials)


# ---------------------------------------------------------------- cleanup

def _call_graph(sys):
    return {n: {c.pred for r in p.rules for c in r.calls} for n, p in sys.preds.items()}


def topological(sys):
    """Predicates ordered callers-first (DFS postorder reversed)."""
    graph, order, seen = _call_graph(sys), [], set()

    def dfs(n):
        seen.add(n)
        for m in sorted(graph[n]):
            if m not in seen:
                dfs(m)
        order.append(n)

    for n in sys.preds:
        if n not in seen:
            dfs(n)
    return order[::-1]


def cleanup(sys, protect=()):
    """Drop dead formals and push existentials into the only callee using them."""
    while True:
        sys2 = _push_existentials(_drop_dead_formals(sys, protect), protect)
        if sys2.preds == sys.preds:
            return sys2
        sys = sys2


def _drop_dead_formals(sys, protect):
    live = {(n, k) for n in protect if n in sys for k in range(sys[n].arity)}
    changed = True
    while changed:
        changed = False
        for n, p in sys.preds.items():
            for k, x in enumerate(p.formals):
                if (n, k) in live:
                    continue
                for r in p.rules:
                    direct = any(x in a.vars() for a in r.spatial + r.pure)
                    via = any(a == x and (c.pred, s) in live for c in r.calls
                              for s, a in enumerate(c.args))
                    if direct or via:
                        live.add((n, k))
                        changed = True
                        break
    dead = {n: [k for k in range(p.arity) if (n, k) not in live] for n, p in sys.preds.items()}
    if not any(dead.values()):
        return sys
    preds = {}
    for n, p in sys.preds.items():
        rules = []
        for r in p.rules:
            calls = tuple(Call(c.pred, tuple(a for s, a in enumerate(c.args) if s not in dead[c.pred]))
                          for c in r.calls)
            r = replace(r, calls=calls)
            used = set(r.all_vars())
            rules.append(replace(r, existentials=tuple(z for z in r.existentials if z in used)))
        formals = tuple(x for k, x in enumerate(p.formals) if k not in dead[n])
        preds[n] = Predicate(n, formals, tuple(rules))
    return sys.copy(preds)


def _occurrences(sys, name):
    for n, p in sys.preds.items():
        for j, r in enumerate(p.rules):
            for i, c in enumerate(r.calls):
                if c.pred == name:
                    yield n, j, i, r, c


def _push_existentials(sys, protect):
    for name in topological(sys):
        if name in protect:
            continue
        p = sys[name]
        occ = list(_occurrences(sys, name))
        if not occ:
            continue
        for k in range(p.arity):
            ok = True
            for n, j, i, r, c in occ:
                z = c.args[k]
                uses = sum(v == z for a in r.atoms() for v in a.vars())
                if z not in r.existentials or uses != 1:
                    ok = False
                    break
            if ok:
                return _push(sys, name, k, occ)
    return sys


def _push(sys, name, k, occ):
    preds = dict(sys.preds)
    edits = {}
    for n, j, i, r, c in occ:
        edits.setdefault((n, j), []).append((i, c.args[k]))
    for (n, j), items in edits.items():
        p = preds[n]
        r = p.rules[j]
        drop = {z for _, z in items}
        calls = list(r.calls)
        for i, _ in items:
            calls[i] = Call(name, calls[i].args[:k] + calls[i].args[k + 1:])
        r = Formula(tuple(z for z in r.existentials if z not in drop), r.spatial, tuple(calls), r.pure)
        rules = list(p.rules)
        rules[j] = r
        preds[n] = replace(p, rules=tuple(rules))
    p = preds[name]
    x = p.formals[k]
    rules = []
    for r in p.rules:
        if x in r.all_vars():
            r = replace(r, existentials=(x,) + r.existentials)
        rules.append(r)
    preds[name] = Predicate(name, p.formals[:k] + p.formals[k + 1:], tuple(rules))
    return sys.copy(preds)


# ---------------------------------------------------------------- parameter elimination

@dataclass
class Artifacts:
    system: InductiveSystem
    root: str
    parameters: frozenset
    signatures: dict = field(default_factory=dict)
    stages: dict = field(default_factory=dict)

    @property
    def local(self):
        return locality_test(self.signatures)


def rename_apart(sys, names):
    """Rename formals and existentials clashing with `names`."""
    names = set(names) - {NIL}
    preds = {}
    for n, p in sys.preds.items():
        taken = set(names) | set(p.formals)
        fsub = {x: fresh(x, taken) for x in p.formals if x in names}
        rules = []
        for r in p.rules:
            t = taken | set(r.all_vars())
            sub = dict(fsub)
            sub.update({z: fresh(z, t) for z in r.existentials if z in names})
            rules.append(r.rename(sub))
        preds[n] = Predicate(n, tuple(fsub.get(x, x) for x in p.formals), tuple(rules))
    return sys.copy(preds)


class _Eliminator:
    def __init__(self, sys):
        self.preds = dict(sys.preds)
        self.memo = {}
        self.tracked = None
        self.taken = set(self.preds)

    def track(self, pname, x, dele):
        key = (pname, x, dele, self.tracked)
        if key in self.memo:
            return self.memo[key]
        p = self.preds[pname]
        q = fresh(f"{pname}_{x}", self.taken)
        self.memo[key] = q
        formals = tuple(v for v in p.formals if not (dele and v == x))
        # placeholder so recursive references resolve
        self.preds[q] = Predicate(q, formals, ())
        rules = tuple(self._rule(p, r, x, dele) for r in p.rules)
        self.preds[q] = Predicate(q, formals, rules)
        return q

    def _rule(self, p, r, x, dele):
        tr = self.tracked
        if x not in r.all_vars():
            return r
        sites = [(i, s) for i, c in enumerate(r.calls) for s, a in enumerate(c.args) if a == x]
        if x in allocated(r) or not sites:
            if dele:
                return r.rename({x: tr})
            return replace(r, pure=r.pure + (Eq(x, tr),))
        if len(sites) != 1:
            raise BranchingPropagation(f"branching propagation of {x} in {p.name}")
        i, s = sites[0]
        call = r.calls[i]
        callee = self.preds[call.pred]
        cx = callee.formals[s]
        if x in targets(r):
            if dele:
                r = replace(r, existentials=r.existentials + (x,))
            sub_del = False
            args = call.args
        else:
            sub_del = dele
            args = call.args[:s] + call.args[s + 1:] if dele else call.args
        q = self.track(call.pred, cx, sub_del)
        calls = list(r.calls)
        calls[i] = Call(q, args)
        return replace(r, calls=tuple(calls))


def eliminate_parameters(sys, root, actuals):
    if len(actuals) != sys[root].arity:
        raise PipelineError(f"{root} expects {sys[root].arity} arguments")
    sys = rename_apart(sys, actuals)
    el = _Eliminator(sys)
    formals = list(sys[root].formals)
    cur = root
    params = {NIL}
    for x, alpha in zip(formals, actuals):
        el.tracked = alpha
        cur = el.track(cur, x, True)
        params.add(alpha)
    _specialize_nil(el, cur)
    out = trim_system(sys.copy(el.preds, query=None), cur)
    out = propagate_nil(out, cur)
    return Artifacts(out, cur, frozenset(params))


def _never_allocated(pred, x):
    return all(x not in allocated(r) for r in pred.rules)


def _specialize_nil(el, root):
    """Replace calls passing nil to a non-allocated formal by a specialised copy."""
    el.tracked = NIL
    done = set()
    todo = [root]
    while todo:
        n = todo.pop()
        if n in done:
            continue
        done.add(n)
        p = el.preds[n]
        rules = []
        for r in p.rules:
            calls = []
            for c in r.calls:
                while True:
                    callee = el.preds[c.pred]
                    s = next((s for s, a in enumerate(c.args)
                              if a == NIL and _never_allocated(callee, callee.formals[s])), None)
                    if s is None:
                        break
                    c = Call(el.track(c.pred, callee.formals[s], True), c.args[:s] + c.args[s + 1:])
                calls.append(c)
                todo.append(c.pred)
            rules.append(replace(r, calls=tuple(calls)))
        el.preds[n] = Predicate(n, p.formals, tuple(rules))


def trim_system(sys, root):
    graph = _call_graph(sys)
    keep, todo = {root}, [root]
    while todo:
        for m in graph[todo.pop()]:
            if m not in keep:
                keep.add(m)
                todo.append(m)
    return sys.copy({n: p for n, p in sys.preds.items() if n in keep})


def propagate_nil(sys, root):
    """Formals receiving nil at every call site (possibly through themselves) become nil."""
    TOP, BOT = object(), object()
    val = {(n, k): TOP for n, p in sys.preds.items() for k in range(p.arity)}
    changed = True
    while changed:
        changed = False
        for n, p in sys.preds.items():
            for r in p.rules:
                for c in r.calls:
                    for s, a in enumerate(c.args):
                        if a == NIL:
                            v = NIL
                        elif a in p.formals:
                            v = val[(n, p.formals.index(a))]
                            if v is TOP:
                                continue
                        else:
                            v = BOT
                        old = val[(c.pred, s)]
                        new = v if old is TOP else (old if old == v else BOT)
                        if new is not old:
                            val[(c.pred, s)] = new
                            changed = True
    nil_of = {n: [k for k in range(p.arity) if val[(n, k)] is NIL] for n, p in sys.preds.items()}
    if not any(nil_of.values()):
        return sys
    preds = {}
    for n, p in sys.preds.items():
        sub = {p.formals[k]: NIL for k in nil_of[n]}
        rules = []
        for r in p.rules:
            r = r.rename(sub)
            calls = tuple(Call(c.pred, tuple(a for s, a in enumerate(c.args) if s not in nil_of[c.pred]))
                          for c in r.calls)
            rules.append(replace(r, calls=calls))
        preds[n] = Predicate(n, tuple(x for k, x in enumerate(p.formals) if k not in nil_of[n]),
                             tuple(rules))
    return sys.copy(preds)


# ---------------------------------------------------------------- signatures

@dataclass(frozen=True)
class Signature:
    fw: frozenset = frozenset()
    bw: frozenset = frozenset()
    eq: frozenset = frozenset()

    def __str__(self):
        f = lambda s: "{" + ",".join(map(str, sorted(s))) + "}"
        return f"fw={f(self.fw)} bw={f(self.bw)} eq={f(self.eq)}"


def _cls(rule):
    return eq_classes(rule.pure, rule.all_vars())


def compute_signatures(sys):
    occ = {n: [] for n in sys.preds}
    for p in sys.preds.values():
        for r in p.rules:
            uf = _cls(r)
            alloc = {uf.find(v) for v in allocated(r)}
            tgt = {uf.find(v) for v in targets(r) if v != NIL}
            for c in r.calls:
                occ[c.pred].append(([uf.find(a) if a != NIL else NIL for a in c.args], alloc, tgt))
    sigs = {}
    for n, p in sys.preds.items():
        fw, bw = set(), set()
        for k, x in enumerate(p.formals):
            is_alloc = is_ref = True
            for r in p.rules:
                uf = _cls(r)
                is_alloc &= uf.find(x) in {uf.find(v) for v in allocated(r)}
                is_ref &= uf.find(x) in {uf.find(v) for v in targets(r) if v != NIL}
            fw_edge = all(args[k] in tgt for args, _, tgt in occ[n])
            bw_edge = all(args[k] in alloc for args, alloc, _ in occ[n])
            if is_alloc and fw_edge:
                fw.add(k)
            elif is_ref and bw_edge:
                bw.add(k)
        eq = set(range(p.arity)) - fw - bw
        sigs[n] = Signature(frozenset(fw), frozenset(bw), frozenset(eq))
    return sigs


def locality_test(signatures):
    return all(not s.eq for s in signatures.values())


# ---------------------------------------------------------------- pipeline

def run_pipeline(sys, root, actuals):
    stages = {}
    protect = {root}
    s = eliminate_equalities(sys)
    stages["eq"] = s
    s = split_system(s, protect=protect)
    stages["split"] = s
    art = eliminate_parameters(s, root, tuple(actuals))
    stages["elim"] = art.system
    art.signatures = compute_signatures(art.system)
    art.stages = stages
    return art
