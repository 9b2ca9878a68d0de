"""Entailment between two predicate instances via automata inclusion."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .automata import inclusion, naive_inclusion, rotation_closure, sl2ta, trim
from .frontend import validate_system
from .oracle import OracleConfig, bounded_entailment
from .preprocess import run_pipeline


class ValidationFailed(Exception):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


VALID, INVALID, UNKNOWN = "Valid", "Invalid", "Unknown"


@dataclass
class Verdict:
    answer: str
    lhs_local: bool
    rhs_local: bool
    lhs_size: tuple
    rhs_size: tuple
    rot_size: tuple
    rot_trim_size: tuple
    witness: dict | None = None
    timings: dict = field(default_factory=dict)
    oracle: object = None

    @property
    def holds(self):
        return self.answer == VALID

    def sizes(self):
        f = lambda s: f"{s[0]}/{s[1]}"
        return f"lhs={f(self.lhs_size)} rhs={f(self.rhs_size)} rot={f(self.rot_size)}"


def compile_side(sys, call):
    art = run_pipeline(sys, call.pred, call.args)
    return art, sl2ta(art)


def check_entailment(sys, query=None, naive=False, validate=True, oracle=None):
    """Decide `query`.  The bounded oracle runs when `oracle` is a config, and
    always when the answer is Unknown, where it serves as evidence."""
    query = query or sys.query
    if query is None:
        raise ValueError("no query")
    if validate:
        diags = validate_system(sys)
        if diags:
            raise ValidationFailed(diags)
    timings = {}
    t0 = time.perf_counter()
    lart, la = compile_side(sys, query.lhs)
    rart, ra = compile_side(sys, query.rhs)
    t1 = time.perf_counter()
    rot = rotation_closure(ra, rart.parameters | lart.parameters)
    t2 = time.perf_counter()
    holds, witness = (naive_inclusion if naive else inclusion)(la, rot)
    t3 = time.perf_counter()
    timings.update(compile=t1 - t0, rotate=t2 - t1, inclusion=t3 - t2)
    if holds:
        answer = VALID
    elif lart.local and rart.local:
        answer = INVALID
    else:
        answer = UNKNOWN
    v = Verdict(answer, lart.local, rart.local, la.counts(), ra.counts(), rot.counts(),
                trim(rot).counts(), witness, timings)
    if oracle is not None or answer == UNKNOWN:
        cfg = oracle or OracleConfig()
        t4 = time.perf_counter()
        v.oracle = bounded_entailment(sys, query, config=cfg)
        timings["oracle"] = time.perf_counter() - t4
    return v
