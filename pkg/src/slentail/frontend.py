"""Reading, printing and checking `.sid` inductive systems."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .slcore import NIL, Call, Emp, Eq, Formula, PointsTo, eq_classes


class SidError(Exception):
    def __init__(self, msg, line=0, col=0):
        super().__init__(msg)
        self.line, self.col = line, col

    def where(self, path="<input>"):
        return f"{path}:{self.line}:{self.col}: {self}"


class SidSyntaxError(SidError):
    pass


class UnknownPredicate(SidError):
    pass


class ArityMismatch(SidError):
    pass


@dataclass(frozen=True)
class Predicate:
    name: str
    formals: tuple
    rules: tuple

    @property
    def arity(self):
        return len(self.formals)


@dataclass(frozen=True)
class Query:
    lhs: Call
    rhs: Call
    line: int = field(default=0, compare=False)

    def __str__(self):
        return f"entail {self.lhs} |- {self.rhs};"


@dataclass
class InductiveSystem:
    preds: dict = field(default_factory=dict)
    query: Query | None = None
    # (pred, rule index) -> (line, col)
    locs: dict = field(default_factory=dict, compare=False)

    def __getitem__(self, name):
        return self.preds[name]

    def __contains__(self, name):
        return name in self.preds

    @property
    def selector_count(self):
        return max((len(a.targets) for p in self.preds.values() for r in p.rules
                    for a in r.points_to), default=0)

    def copy(self, preds=None, query=...):
        return InductiveSystem(dict(self.preds if preds is None else preds),
                               self.query if query is ... else query, self.locs)

    def loc(self, pred, idx=0):
        return self.locs.get((pred, idx), (0, 0))

    def __str__(self):
        return print_system(self)


# ---------------------------------------------------------------- lexer

TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<op>::=|\|-|->|\\E|[(),|;.*&=])
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
""", re.X)


def tokenize(text):
    line, start, pos = 1, 0, 0
    out = []
    while pos < len(text):
        m = TOKEN.match(text, pos)
        if not m:
            raise SidSyntaxError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind in ("op", "name"):
            out.append((kind, m.group(), line, m.start() - start + 1))
        pos = m.end()
    out.append(("eof", "", line, pos - start + 1))
    return out


class Parser:
    def __init__(self, text):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg, cls=SidSyntaxError):
        _, _, line, col = self.tok
        return cls(msg, line, col)

    def expect(self, value):
        if self.tok[1] != value:
            raise self.error(f"expected {value!r}, found {self.tok[1] or 'end of file'!r}")
        self.i += 1

    def name(self):
        kind, val, *_ = self.tok
        if kind != "name":
            raise self.error(f"expected identifier, found {val or 'end of file'!r}")
        self.i += 1
        return val

    def var_list(self, allow_nil=True):
        out = [self.var(allow_nil)]
        while self.tok[1] == ",":
            self.i += 1
            out.append(self.var(allow_nil))
        return tuple(out)

    def var(self, allow_nil=True):
        line, col = self.tok[2:]
        v = self.name()
        if v in ("emp", "entail") or (v == NIL and not allow_nil):
            raise SidSyntaxError(f"reserved word {v!r} used as a variable", line, col)
        return v

    def rule(self):
        line, col = self.tok[2:]
        ex = ()
        if self.tok[1] == "\\E":
            self.i += 1
            ex = self.var_list(allow_nil=False)
            self.expect(".")
        spatial, calls = [], []
        while True:
            self.atom(spatial, calls)
            if self.tok[1] != "*":
                break
            self.i += 1
        pure = []
        while self.tok[1] == "&":
            self.i += 1
            a = self.var()
            self.expect("=")
            pure.append(Eq(a, self.var()))
        return Formula(ex, tuple(spatial), tuple(calls), tuple(pure)), (line, col)

    def atom(self, spatial, calls):
        line, col = self.tok[2:]
        if self.tok == ("name", "emp", line, col):
            self.i += 1
            spatial.append(Emp())
            return
        head = self.var()
        if self.tok[1] == "->":
            self.i += 1
            if head == NIL:
                raise SidSyntaxError("nil cannot be allocated", line, col)
            self.expect("(")
            spatial.append(PointsTo(head, self.var_list()))
            self.expect(")")
        elif self.tok[1] == "(":
            self.i += 1
            args = self.var_list() if self.tok[1] != ")" else ()
            self.expect(")")
            calls.append((Call(head, args), line, col))
        else:
            raise self.error("expected '->' or '('")

    def system(self):
        sys = InductiveSystem()
        pending = []
        queries = []
        while self.tok[0] != "eof":
            if self.tok[:2] == ("name", "entail"):
                queries.append(self.query())
                continue
            line, col = self.tok[2:]
            name = self.name()
            if name in sys.preds:
                raise SidError(f"predicate {name} defined twice", line, col)
            self.expect("(")
            formals = self.var_list(allow_nil=False) if self.tok[1] != ")" else ()
            self.expect(")")
            if len(set(formals)) != len(formals):
                raise SidError(f"duplicate formal in {name}", line, col)
            self.expect("::=")
            rules = []
            while True:
                f, pos = self.rule()
                sys.locs[(name, len(rules))] = pos
                pending.append((name, len(rules), f))
                rules.append(f)
                if self.tok[1] != "|":
                    break
                self.i += 1
            self.expect(";")
            sys.preds[name] = Predicate(name, formals, tuple(rules))
        # strip call positions, then resolve
        for name, pred in list(sys.preds.items()):
            rules = []
            for r in pred.rules:
                for c, line, col in r.calls:
                    _resolve(sys, c, line, col)
                rules.append(replace(r, calls=tuple(c for c, *_ in r.calls)))
            sys.preds[name] = replace(pred, rules=tuple(rules))
        if len(queries) > 1:
            raise SidError("at most one query per file", queries[1][2], 1)
        if queries:
            sys.query = _desugar(sys, *queries[0])
        return sys

    def query(self):
        line = self.tok[2]
        self.i += 1
        lhs, _ = self.rule()
        self.expect("|-")
        rhs, _ = self.rule()
        self.expect(";")
        return lhs, rhs, line


def _resolve(sys, call, line, col):
    if call.pred not in sys.preds:
        raise UnknownPredicate(f"unknown predicate {call.pred}", line, col)
    want = sys.preds[call.pred].arity
    if len(call.args) != want:
        raise ArityMismatch(f"{call.pred} expects {want} arguments, got {len(call.args)}", line, col)


def _fresh_pred(sys, base):
    name, k = base, 1
    while name in sys.preds:
        name, k = f"{base}{k}", k + 1
    return name


def _desugar(sys, lhs, rhs, line):
    """Sides that are not a bare call become fresh top-level predicates."""
    sides = []
    for f, base in ((lhs, "LHS"), (rhs, "RHS")):
        calls = [c for c, *_ in f.calls]
        for c, l, col in f.calls:
            _resolve(sys, c, l, col)
        f = replace(f, calls=tuple(calls))
        if not f.existentials and not f.spatial and not f.pure and len(calls) == 1:
            sides.append(calls[0])
            continue
        name = _fresh_pred(sys, base)
        formals = tuple(f.free_vars())
        sys.preds[name] = Predicate(name, formals, (f,))
        sys.locs[(name, 0)] = (line, 1)
        sides.append(Call(name, formals))
    return Query(sides[0], sides[1], line)


def parse_system(text):
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return Parser(text).system()


def with_query(sys, lhs, rhs):
    """A copy of `sys` whose query is `lhs |- rhs`, given as rule bodies."""
    out = sys.copy(dict(sys.preds), query=None)
    out.locs = dict(sys.locs)
    sides = []
    for text in (lhs, rhs):
        p = Parser(text)
        f, _ = p.rule()
        if p.tok[0] != "eof":
            raise p.error("trailing input")
        sides.append(f)
    out.query = _desugar(out, sides[0], sides[1], 0)
    return out


def parse_formula(text):
    """A single rule body; calls are left unresolved."""
    p = Parser(text)
    f, _ = p.rule()
    if p.tok[0] != "eof":
        raise p.error("trailing input")
    return replace(f, calls=tuple(c for c, *_ in f.calls))


# ---------------------------------------------------------------- printer

def print_rule(f):
    return str(f)


def print_predicate(p):
    head = f"{p.name}({', '.join(p.formals)}) ::= "
    pad = " " * (len(head) - 2)
    return head + f"\n{pad}| ".join(print_rule(r) for r in p.rules) + ";"


def print_system(sys):
    out = [print_predicate(p) for p in sys.preds.values()]
    if sys.query is not None:
        out.append(str(sys.query))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- size

def rule_size(f):
    n = len(f.existentials) + len(f.pure)
    for a in f.spatial:
        n += 1 if isinstance(a, Emp) else len(a.targets) + 1
    return n + sum(len(c.args) for c in f.calls)


def system_size(sys):
    return sum(rule_size(r) for p in sys.preds.values() for r in p.rules)


# ---------------------------------------------------------------- validation

@dataclass(frozen=True)
class Diagnostic:
    kind: str
    pred: str
    rule: int
    message: str
    line: int = 0
    col: int = 0

    def __str__(self):
        return f"{self.line}:{self.col}: {self.kind}: {self.message}"


def allocated(rule):
    return [a.source for a in rule.points_to]


def reach(rule, start):
    """Equivalence classes reachable from `start` through points-to edges."""
    uf = eq_classes(rule.pure, rule.all_vars())
    seen = {uf.find(start)}
    changed = True
    while changed:
        changed = False
        for a in rule.points_to:
            if uf.find(a.source) in seen:
                for t in a.targets:
                    if t != NIL and uf.find(t) not in seen:
                        seen.add(uf.find(t))
                        changed = True
    return uf, seen


def head_roots(rule):
    """Variables from which every free variable of the head is reachable."""
    head_vars = {v for a in rule.points_to for v in a.vars() if v != NIL}
    out = []
    for v in rule.all_vars():
        uf, seen = reach(rule, v)
        if all(uf.find(w) in seen for w in head_vars):
            out.append(v)
    return out


def root_indices(pred):
    out = set(range(pred.arity))
    for r in pred.rules:
        roots = set(head_roots(r))
        uf = eq_classes(r.pure, r.all_vars())
        root_cls = {uf.find(v) for v in roots}
        out &= {k for k, x in enumerate(pred.formals) if uf.find(x) in root_cls}
    return out


def rule_roots(sys, pred, rule, ridx=None):
    """Candidate roots making the rule connected: formals first, then existentials
    when no formal appears in the head."""
    head_vars = {v for a in rule.points_to for v in a.vars() if v != NIL}
    formal_roots = [x for x in pred.formals if x in head_vars]
    candidates = formal_roots or [z for z in rule.existentials if z in head_vars]
    out = []
    for x in candidates:
        uf, seen = reach(rule, x)
        if not all(uf.find(w) in seen for w in head_vars):
            continue
        ok = True
        for c in rule.calls:
            idx = root_indices(sys[c.pred])
            if not any(uf.find(c.args[s]) in seen for s in idx if c.args[s] != NIL):
                ok = False
                break
        if ok:
            out.append(x)
    return out


def validate_system(sys):
    diags = []

    def report(kind, p, j, msg):
        line, col = sys.loc(p.name, j)
        diags.append(Diagnostic(kind, p.name, j, msg, line, col))

    for p in sys.preds.values():
        for j, r in enumerate(p.rules):
            where = f"rule {j + 1} of {p.name}"
            for v in r.all_vars():
                if v not in p.formals and v not in r.existentials:
                    report("UnboundVariable", p, j, f"{v} unbound in {where}")
            if set(r.existentials) & set(p.formals):
                report("Shadowing", p, j, f"existential shadows a formal in {where}")
            if not r.points_to:
                report("EmptyHead", p, j, f"{where} has an empty head")
                continue
            alloc = set(allocated(r))
            uf = eq_classes(r.pure, r.all_vars())
            alloc_cls = {uf.find(a) for a in alloc}
            for e in r.pure:
                touches = {e.lhs, e.rhs} & set(p.formals)
                if touches and not ({e.lhs, e.rhs} & alloc or uf.find(e.lhs) in alloc_cls):
                    report("PureShape", p, j, f"equality {e} in {where} involves a formal "
                           "but no allocated variable")
            seen = {}
            for ci, c in enumerate(r.calls):
                for v in c.args:
                    if v == NIL or v not in p.formals:
                        continue
                    cls = uf.find(v)
                    if cls in alloc_cls:
                        continue
                    if seen.setdefault(cls, ci) != ci:
                        report("BranchingPropagation", p, j,
                               f"formal {v} passed to two predicate occurrences in {where}")
            if not rule_roots(sys, p, r, j):
                report("DisconnectedRule", p, j, f"{where} is not connected")
    return diags
