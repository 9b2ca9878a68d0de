"""Command line interface: ``slentail check|compile|rotate|validate``."""

from __future__ import annotations

import json
import sys as _sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import click

from .automata import rotation_closure, sl2ta
from .entail import INVALID, UNKNOWN, VALID, ValidationFailed, check_entailment
from .frontend import Call, SidError, parse_system, print_system, validate_system, with_query
from .oracle import COUNTERMODEL, OracleConfig
from .preprocess import PipelineError, run_pipeline

EXIT = {VALID: 0, INVALID: 1, UNKNOWN: 2}
EXIT_ERROR = 3
STAGES = ("eq", "split", "elim", "sig")


class Failure(Exception):
    """An error already formatted for standard error."""


@dataclass
class RunReport:
    file: str
    query: str
    verdict: str
    sizes: dict
    local: dict
    timings: dict = field(default_factory=dict)
    oracle: str | None = None
    countermodel: str | None = None
    witness: str | None = None

    def kv(self, timings=False, with_file=False):
        parts = [f"file={self.file}"] if with_file else []
        parts.append(f"verdict={self.verdict}")
        parts += [f"{k}={v}" for k, v in self.sizes.items()]
        if self.oracle:
            parts.append(f"oracle={self.oracle}")
        if timings:
            parts += [f"t_{k}_us={v}" for k, v in self.timings.items()]
        lines = [" ".join(parts)]
        if self.countermodel:
            lines.append(f"countermodel: {self.countermodel}")
        return "\n".join(lines)

    def structured(self, timings=False):
        d = {"file": self.file, "query": self.query, "verdict": self.verdict,
             "sizes": self.sizes, "local": self.local}
        if self.oracle:
            d["oracle"] = self.oracle
        if self.countermodel:
            d["countermodel"] = self.countermodel
        if timings:
            d["timings_us"] = self.timings
        return d


# ---------------------------------------------------------------- helpers

def _load(path, lhs=None, rhs=None):
    try:
        sys = parse_system(Path(path).read_text())
        if lhs is not None or rhs is not None:
            if lhs is None or rhs is None:
                raise Failure(f"{path}: --lhs and --rhs must be given together")
            sys = with_query(sys, lhs, rhs)
    except SidError as e:
        raise Failure(e.where(path)) from e
    except OSError as e:
        raise Failure(f"{path}: {e.strerror}") from e
    return sys


def _validate(path, sys):
    diags = validate_system(sys)
    if diags:
        raise Failure("\n".join(f"{path}:{d}" for d in diags))


def _call(sys, pred, args, path):
    if pred is None:
        if sys.query is None:
            raise Failure(f"{path}: no query and no --pred given")
        return sys.query.rhs
    if pred not in sys.preds:
        raise Failure(f"{path}: unknown predicate {pred}")
    actuals = tuple(a.strip() for a in args.split(",")) if args else ()
    if len(actuals) != sys[pred].arity:
        raise Failure(f"{path}: {pred} expects {sys[pred].arity} arguments, got {len(actuals)}")
    return Call(pred, actuals)


def _stage_text(art, stage):
    if stage == "sig":
        return "".join(f"{n} {s}\n" for n, s in sorted(art.signatures.items()))
    return print_system(art.stages[stage])


def _compile(path, sys, call):
    try:
        art = run_pipeline(sys, call.pred, call.args)
    except PipelineError as e:
        raise Failure(f"{path}: {e.kind}: {e}") from e
    return art, sl2ta(art)


def _run_check(path, lhs, rhs, opts):
    sys = _load(path, lhs, rhs)
    if sys.query is None:
        raise Failure(f"{path}: no query")
    _validate(path, sys)
    out = []
    if opts["dump_stage"]:
        for side, call in (("lhs", sys.query.lhs), ("rhs", sys.query.rhs)):
            art, _ = _compile(path, sys, call)
            out.append(f"# {side} {opts['dump_stage']}\n{_stage_text(art, opts['dump_stage'])}")
    cfg = OracleConfig(depth=opts["depth"], cells=opts["cells"]) if opts["oracle"] else None
    try:
        v = check_entailment(sys, naive=opts["naive"], validate=False, oracle=cfg)
    except PipelineError as e:
        raise Failure(f"{path}: {e.kind}: {e}") from e
    except ValidationFailed as e:
        raise Failure("\n".join(f"{path}:{d}" for d in e.diagnostics)) from e
    if opts["emit_ta"]:
        for side, call in (("lhs", sys.query.lhs), ("rhs", sys.query.rhs)):
            art, a = _compile(path, sys, call)
            out.append(f"# {side} automaton\n{a.dump()}")
            if side == "rhs":
                out.append(f"# rotated rhs automaton\n{rotation_closure(a, art.parameters).dump()}")
    fmt = lambda s: f"{s[0]}/{s[1]}"
    report = RunReport(
        file=Path(path).name, query=str(sys.query), verdict=v.answer,
        sizes={"lhs": fmt(v.lhs_size), "rhs": fmt(v.rhs_size), "rot": fmt(v.rot_size)},
        local={"lhs": v.lhs_local, "rhs": v.rhs_local},
        timings={k: round(t * 1e6) for k, t in v.timings.items()})
    if v.oracle is not None:
        report.oracle = v.oracle.kind
        if v.oracle.model is not None:
            report.countermodel = str(v.oracle.model)
        if opts["oracle"] and v.answer == VALID and v.oracle.kind == COUNTERMODEL:
            raise Failure(f"{path}: oracle disagreement: Valid verdict but countermodel "
                          f"{v.oracle.model}")
    return report, "".join(out)


def _emit(report, extra, opts, with_file=False):
    if extra:
        click.echo(extra, nl=False)
    if opts["fmt"] == "json":
        click.echo(json.dumps(report.structured(opts["timings"]), sort_keys=True))
    else:
        click.echo(report.kv(opts["timings"], with_file))


def _fail(msg):
    click.echo(msg, err=True)
    return EXIT_ERROR


# ---------------------------------------------------------------- commands

@click.group()
def main():
    """Decide entailments between inductive separation logic predicates."""


@main.command()
@click.argument("target", type=click.Path())
@click.option("--all", "run_all", is_flag=True, help="TARGET is a directory; check every query file in it.")
@click.option("--lhs", help="Override the query's left-hand side.")
@click.option("--rhs", help="Override the query's right-hand side.")
@click.option("--dump-stage", type=click.Choice(STAGES), help="Print an intermediate system.")
@click.option("--emit-ta", is_flag=True, help="Print the automata.")
@click.option("--oracle", is_flag=True, help="Cross-check with bounded model enumeration.")
@click.option("--depth", default=4, show_default=True, help="Oracle unfolding depth.")
@click.option("--cells", default=8, show_default=True, help="Oracle heap size bound.")
@click.option("--naive-inclusion", "naive", is_flag=True, help="Use determinisation instead of antichains.")
@click.option("--timings", is_flag=True, help="Report per-stage wall time in microseconds.")
@click.option("--format", "fmt", type=click.Choice(["kv", "json"]), default="kv", show_default=True)
def check(target, run_all, lhs, rhs, **opts):
    """Check the entailment query in TARGET."""
    if not run_all:
        try:
            report, extra = _run_check(target, lhs, rhs, opts)
        except Failure as e:
            _sys.exit(_fail(str(e)))
        _emit(report, extra, opts)
        _sys.exit(EXIT[report.verdict])
    files = sorted(p for p in Path(target).glob("*.sid") if "entail" in p.read_text())
    if not files:
        _sys.exit(_fail(f"{target}: no query files"))

    def job(p):
        try:
            return _run_check(p, lhs, rhs, opts)
        except Failure as e:
            return e

    with ThreadPoolExecutor() as pool:
        results = list(pool.map(job, files))
    code = 0
    for res in results:
        if isinstance(res, Failure):
            _fail(str(res))
            code = EXIT_ERROR
        else:
            _emit(*res, opts, with_file=True)
            code = max(code, EXIT[res[0].verdict])
    _sys.exit(code)


@main.command(name="compile")
@click.argument("path", type=click.Path())
@click.option("--pred", help="Root predicate (default: the query's right-hand side).")
@click.option("--args", "args", default="", help="Comma separated actual parameters.")
@click.option("--dump-stage", type=click.Choice(STAGES))
def compile_(path, pred, args, dump_stage):
    """Emit the tree automaton of a predicate instance."""
    try:
        sys = _load(path)
        _validate(path, sys)
        art, a = _compile(path, sys, _call(sys, pred, args, path))
    except Failure as e:
        _sys.exit(_fail(str(e)))
    if dump_stage:
        click.echo(_stage_text(art, dump_stage), nl=False)
    click.echo(a.dump(), nl=False)


@main.command()
@click.argument("path", type=click.Path())
@click.option("--pred", help="Root predicate (default: the query's right-hand side).")
@click.option("--args", "args", default="", help="Comma separated actual parameters.")
def rotate(path, pred, args):
    """Emit the rotation closure of a predicate instance's automaton."""
    try:
        sys = _load(path)
        _validate(path, sys)
        art, a = _compile(path, sys, _call(sys, pred, args, path))
    except Failure as e:
        _sys.exit(_fail(str(e)))
    click.echo(rotation_closure(a, art.parameters).dump(), nl=False)


@main.command()
@click.argument("path", type=click.Path())
def validate(path):
    """Check syntax, variable scoping and connectivity."""
    try:
        sys = _load(path)
        _validate(path, sys)
    except Failure as e:
        _sys.exit(_fail(str(e)))
    click.echo(f"{path}: ok ({len(sys.preds)} predicates)")


if __name__ == "__main__":
    main()
