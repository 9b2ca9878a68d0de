"""Print verdicts and automaton sizes for every corpus query next to the reference values."""

import argparse
import csv
import time
from dataclasses import dataclass
from pathlib import Path

from slentail import check_entailment, parse_system

ROOT = Path(__file__).resolve().parent.parent


@dataclass
class TableConfig:
    corpus: Path = ROOT / "corpus"
    naive: bool = False


def fmt(size):
    return f"{size[0]}/{size[1]}"


def main(cfg: TableConfig):
    head = f"{'query':24} {'answer':8} {'lhs':>6} {'rhs':>6} {'rot':>6}   {'reference':26} {'ms':>6}"
    print(head)
    print("-" * len(head))
    mismatches = 0
    with open(cfg.corpus / "expected.tsv", newline="") as f:
        table = list(csv.DictReader(f, delimiter="\t"))
    for row in table:
        name, answer = row["query"], row["answer"]
        lhs, rhs, rot = (tuple(map(int, row[k].split("/"))) for k in ("lhs", "rhs", "rot"))
        system = parse_system((cfg.corpus / f"{name}.sid").read_text())
        t = time.perf_counter()
        v = check_entailment(system, naive=cfg.naive)
        ms = (time.perf_counter() - t) * 1e3
        ref = f"{str(answer):5} {fmt(lhs):>6} {fmt(rhs):>6} {fmt(rot):>6}"
        ours = (v.lhs_size, v.rhs_size, v.rot_size)
        mark = "" if ours == (lhs, rhs, rot) else "  *"
        mismatches += bool(mark)
        print(f"{name:24} {v.answer:8} {fmt(v.lhs_size):>6} {fmt(v.rhs_size):>6} "
              f"{fmt(v.rot_size):>6}   {ref:26} {ms:6.1f}{mark}")
    print(f"\n{mismatches} row(s) with size differences (*)")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corpus", type=Path, default=TableConfig.corpus)
    ap.add_argument("--naive", action="store_true", help="use determinisation for inclusion")
    a = ap.parse_args()
    main(TableConfig(a.corpus, a.naive))
