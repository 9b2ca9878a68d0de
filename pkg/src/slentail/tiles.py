"""Tiles, their composition, normal forms and canonical rotations."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .slcore import NIL, BoundExceeded, Eq, Formula, PointsTo, UnionFind


class PortMismatch(Exception):
    pass


class NotSingleton(Exception):
    pass


@dataclass(frozen=True)
class Port:
    fw: tuple = ()
    bw: tuple = ()
    eq: tuple = ()

    @property
    def vars(self):
        return self.fw + self.bw + self.eq

    def __len__(self):
        return len(self.fw) + len(self.bw) + len(self.eq)

    def swap(self):
        """The same port seen from the other side of the edge."""
        return Port(self.bw, self.fw, self.eq)

    def shape(self):
        return len(self.fw), len(self.bw), len(self.eq)

    def rename(self, sub):
        f = lambda xs: tuple(sub.get(x, x) for x in xs)
        return Port(f(self.fw), f(self.bw), f(self.eq))

    def __str__(self):
        return ";".join(",".join(p) for p in (self.fw, self.bw, self.eq))


@dataclass(frozen=True)
class Tile:
    formula: Formula
    in_port: Port = Port()
    out_ports: tuple = ()

    @property
    def arity(self):
        return len(self.out_ports)

    def ports(self):
        return (self.in_port,) + self.out_ports

    def port_vars(self):
        return {v for p in self.ports() for v in p.vars}

    def params(self):
        pv = self.port_vars()
        return [v for v in self.formula.free_vars() if v not in pv]

    @property
    def atom(self):
        pts = self.formula.points_to
        if len(pts) != 1:
            raise NotSingleton(str(self))
        return pts[0]

    def rename(self, sub):
        return Tile(self.formula.rename(sub), self.in_port.rename(sub),
                    tuple(p.rename(sub) for p in self.out_ports))

    def __str__(self):
        s = f"{self.formula} | in: {self.in_port}"
        for k, p in enumerate(self.out_ports):
            s += f" | out_{k}: {p}"
        return s


# ---------------------------------------------------------------- composition

def _constants(constants):
    return frozenset(constants) | {NIL}


def tag(tile, pos, constants=()):
    """Rename every non-constant variable with a position suffix."""
    consts = _constants(constants) | set(tile.params())
    names = set(tile.formula.all_vars()) | set(tile.formula.existentials) | tile.port_vars()
    at = "".join(map(str, pos))
    bound = set(tile.formula.existentials)
    return tile.rename({v: f"{v}@{at}" for v in names if v in bound or v not in consts})


def compose_tiles(t1, i, t2, constants=()):
    consts = _constants(constants)
    if not 0 <= i < t1.arity:
        raise PortMismatch(f"no out-port {i}")
    xi, y = t1.out_ports[i], t2.in_port
    if len(xi) != len(y):
        raise PortMismatch(f"port widths {len(xi)} and {len(y)} differ")
    v1 = set(t1.formula.all_vars()) | t1.port_vars()
    v2 = set(t2.formula.all_vars()) | t2.port_vars()
    clash = (v1 & v2) - consts
    if clash:
        raise ValueError(f"variables not apart: {sorted(clash)}")
    outs = t1.out_ports[:i] + t2.out_ports + t1.out_ports[i + 1:]
    remaining = {v for p in (t1.in_port,) + outs for v in p.vars}
    f1, f2 = t1.formula, t2.formula
    quantified = set(f1.existentials) | set(f2.existentials)
    bound = [v for v in dict.fromkeys(xi.vars + y.vars)
             if v not in consts and v not in remaining and v not in quantified]
    eqs = tuple(Eq(a, b) for a, b in zip(xi.vars, y.vars) if a != b)
    phi = Formula(tuple(bound) + f1.existentials + f2.existentials,
                  f1.spatial + f2.spatial, (), f1.pure + f2.pure + eqs)
    return Tile(phi, t1.in_port, outs)


def check_tree(tree):
    for p, t in tree.items():
        kids = sum(1 for q in tree if len(q) == len(p) + 1 and q[:-1] == p)
        if kids != t.arity or any(p + (i,) not in tree for i in range(kids)):
            raise PortMismatch(f"arity of node {p} is {t.arity}, tree has {kids} children")
        for i in range(kids):
            if tree[p + (i,)].in_port.shape() != t.out_ports[i].shape():
                if len(tree[p + (i,)].in_port) != len(t.out_ports[i]):
                    raise PortMismatch(f"port width mismatch below {p}")


def char_tile(tree, constants=(), pos=()):
    t = tag(tree[pos], pos, constants)
    for i in reversed(range(t.arity)):
        t = compose_tiles(t, i, char_tile(tree, constants, pos + (i,)), constants)
    return t


def char_formula(tree, constants=()):
    check_tree(tree)
    return char_tile(tree, constants).formula


# ---------------------------------------------------------------- normal form

def _class_map(tile, consts):
    uf = UnionFind(tile.formula.all_vars())
    for v in tile.port_vars():
        uf.add(v)
    for pt in tile.formula.points_to:
        for v in (pt.source, *pt.targets):
            uf.add(v)
    for e in tile.formula.pure:
        uf.union(e.lhs, e.rhs)
    members = {}
    for v in list(uf.parent):
        members.setdefault(uf.find(v), []).append(v)
    return uf, members


def normalize_tile(tile, constants=()):
    """Canonical renaming of a singleton tile; equal normal forms mean equal symbols."""
    consts = _constants(constants) | set(tile.params())
    atom = tile.atom
    uf, members = _class_map(tile, consts)
    names, counter = {}, [0]

    def name(v):
        r = uf.find(v)
        if r not in names:
            cs = sorted(c for c in members[r] if c in consts)
            if cs:
                names[r] = cs[0]
            else:
                names[r] = f"_{counter[0]}"
                counter[0] += 1
        return names[r]

    z = name(atom.source)
    tg = tuple(name(v) for v in atom.targets)
    ports = [Port(*(tuple(name(v) for v in part) for part in (p.fw, p.bw, p.eq)))
             for p in tile.ports()]
    in_port, outs = ports[0], tuple(ports[1:])
    pv = {v for p in ports for v in p.vars}
    used = [z, *tg]
    ex = tuple(sorted({v for v in used if v.startswith("_") and v not in consts and v not in pv},
                      key=lambda v: int(v[1:])))
    pure = []
    for r, cls in members.items():
        cs = sorted(c for c in cls if c in consts)
        pure += [Eq(cs[0], c) for c in cs[1:]]
    phi = Formula(ex, (PointsTo(z, tg),), (), tuple(sorted(pure, key=str)))
    return Tile(phi, in_port, outs)


def tile_classes(tile, constants=()):
    """Equivalence class id of every variable of a normal tile (names are classes)."""
    uf, _ = _class_map(tile, _constants(constants))
    return uf


# ---------------------------------------------------------------- canonicity

def _sel_index(atom, uf, v):
    for k, t in enumerate(atom.targets):
        if uf.find(t) == uf.find(v):
            return k
    return None


def tile_diagnostics(tile, constants=(), quasi=True):
    """Reasons why `tile` is not (quasi-)canonical; empty when it is."""
    out = []
    consts = _constants(constants) | set(tile.params())
    try:
        atom = tile.atom
    except NotSingleton:
        return ["formula must have exactly one points-to"]
    uf, members = _class_map(tile, consts)
    z = uf.find(atom.source)
    tcls = {uf.find(t) for t in atom.targets}
    if not quasi and any(p.eq for p in tile.ports()):
        out.append("non-empty eq part")
    # which ports mention a target in fw/bw
    owner = {}
    for k, p in enumerate(tile.ports()):
        for v in p.fw + p.bw:
            c = uf.find(v)
            if c in tcls and c != z:
                owner.setdefault(c, set()).add(k)
    for c, ks in owner.items():
        if len(ks) > 1:
            out.append(f"target {c} occurs in several ports")
    for t in atom.targets:
        c = uf.find(t)
        if c == z or any(m in consts for m in members[c]):
            continue
        if c not in owner and not any(uf.find(v) == c for p in tile.ports() for v in p.eq):
            out.append(f"target {t} is not a port variable")
    inp = tile.in_port
    sels = [_sel_index(atom, uf, v) for v in inp.bw]
    if None in sels or sels != sorted(set(sels)):
        out.append("in-port bw part not ordered by selector")
    if any(uf.find(v) != z for v in inp.fw):
        out.append("in-port fw part must equal the allocated variable")
    firsts = []
    for k, p in enumerate(tile.out_ports):
        sels = [_sel_index(atom, uf, v) for v in p.fw]
        if not p.fw or None in sels or sels != sorted(set(sels)):
            out.append(f"out-port {k} fw part not ordered by selector")
        else:
            firsts.append(sels[0])
        if any(uf.find(v) != z for v in p.bw):
            out.append(f"out-port {k} bw part must equal the allocated variable")
    if firsts != sorted(firsts):
        out.append("out-ports not ordered by first selector")
    if quasi:
        eqs = [(k, uf.find(v)) for k, p in enumerate(tile.ports()) for v in p.eq]
        for k, c in eqs:
            if c == z or c in tcls or any(m in consts for m in members[c]):
                continue
            partners = [j for j, d in eqs if d == c and j != k]
            if len(partners) != 1:
                out.append(f"eq variable {c} of port {k - 1} is not threaded to exactly one port")
    return out


def is_quasi_canonical_tile(tile, constants=()):
    return not tile_diagnostics(tile, constants, quasi=True)


def is_canonical_tile(tile, constants=()):
    return not tile_diagnostics(tile, constants, quasi=False)


def canonical_projection(tree, constants=()):
    """Drop eq parts; the dropped variables become plain existentials."""
    out = {}
    for p, t in tree.items():
        strip = lambda port: Port(port.fw, port.bw, ())
        t2 = Tile(t.formula, strip(t.in_port), tuple(strip(q) for q in t.out_ports))
        gone = t.port_vars() - t2.port_vars()
        f = t2.formula
        ex = f.existentials + tuple(v for v in dict.fromkeys(f.all_vars()) if v in gone)
        out[p] = normalize_tile(Tile(replace(f, existentials=ex), t2.in_port, t2.out_ports),
                                constants)
    return out


# ---------------------------------------------------------------- rotations

def children(dom, p):
    return sorted(q for q in dom if len(q) == len(p) + 1 and q[:-1] == p)


def neighbours(dom, p):
    out = children(dom, p)
    if p:
        out.append(p[:-1])
    return out


def direction(dom, p, q):
    """j such that q = p.j, with -1 for the parent."""
    if q == p[:-1] and p:
        return -1
    if len(q) == len(p) + 1 and q[:-1] == p:
        return q[-1]
    return None


def rotations(dom_t, dom_u, limit=None):
    """Bijections r between domains keeping parent and child adjacent."""
    dom_t, dom_u = sorted(dom_t), sorted(dom_u)
    if len(dom_t) != len(dom_u):
        return
    order = sorted(dom_t, key=lambda p: (len(p), p))
    found = 0

    def extend(k, r, used):
        nonlocal found
        if k == len(order):
            found += 1
            yield dict(r)
            return
        p = order[k]
        cands = dom_u if not p else [q for q in neighbours(dom_u, r[p[:-1]]) if q not in used]
        for q in cands:
            if q in used:
                continue
            r[p] = q
            used.add(q)
            yield from extend(k + 1, r, used)
            used.discard(q)
            del r[p]
            if limit and found >= limit:
                return

    yield from extend(0, {}, set())


def _unify(sigma, xs, ys, consts):
    if len(xs) != len(ys):
        return False
    for a, b in zip(xs, ys):
        if a in consts or b in consts:
            if a != b:
                return False
        elif sigma.setdefault(a, b) != b:
            return False
    return True


def _port_toward(tile, j):
    """The port of `tile` facing direction j, written as an out-port."""
    return tile.in_port.swap() if j == -1 else tile.out_ports[j]


def node_matches(tt, tu, pairs, consts, quasi=True):
    """Port equations of a rotation at one node.  `pairs` lists (i, j): the
    t-node's neighbour in direction i sits in direction j of the u-node."""
    sigma = {}
    a, b = tt.atom, tu.atom
    if not _unify(sigma, (a.source,) + a.targets, (b.source,) + b.targets, consts):
        return False
    if {str(e) for e in tt.formula.rename(sigma).pure} != {str(e) for e in tu.formula.pure}:
        return False
    for i, j in pairs:
        pt, pu = _port_toward(tt, i), _port_toward(tu, j)
        if not (_unify(sigma, pt.fw, pu.fw, consts) and _unify(sigma, pt.bw, pu.bw, consts)):
            return False
        if quasi and not _unify(sigma, pt.eq, pu.eq, consts):
            return False
    return len(set(sigma.values())) == len(sigma)


def is_rotation(t, u, r, constants=(), quasi=True):
    consts = _constants(constants)
    for p in t:
        pairs = []
        for q in neighbours(t, p):
            j = direction(u, r[p], r[q])
            if j is None:
                return False
            pairs.append((direction(t, p, q), j))
        if not node_matches(t[p], u[r[p]], pairs, consts, quasi):
            return False
    return True


def rotation_oracle(t, u, constants=(), quasi=True, bound=8):
    """Some r with t ~ u (quasi-canonical when `quasi`), or None."""
    if len(t) > bound:
        raise BoundExceeded(f"{len(t)} nodes > {bound}")
    for r in rotations(t, u):
        if is_rotation(t, u, r, constants, quasi):
            return r
    return None


# ---------------------------------------------------------------- dumping

def tree_str(tree):
    return "\n".join(f"{''.join(map(str, p)) or 'e'}: {t}" for p, t in sorted(tree.items()))
